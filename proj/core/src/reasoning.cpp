#include "msgnav/reasoning.hpp"

#include <algorithm>
#include <fstream>

#include "msgnav/errors.hpp"

namespace msgnav {

using nlohmann::json;

std::string to_string(GoalKind k) {
    switch (k) {
        case GoalKind::Category: return "category";
        case GoalKind::Language: return "language";
        case GoalKind::Image: return "image";
    }
    return "category";
}

GoalKind goal_kind_from_string(const std::string& s) {
    if (s == "category") return GoalKind::Category;
    if (s == "language") return GoalKind::Language;
    if (s == "image") return GoalKind::Image;
    throw ConfigError("unknown goal kind: " + s);
}

Goal Goal::category(std::string term) {
    Goal g;
    g.kind = GoalKind::Category;
    g.category_term = std::move(term);
    return g;
}

Goal Goal::language(std::string description) {
    Goal g;
    g.kind = GoalKind::Language;
    g.description = std::move(description);
    return g;
}

Goal Goal::image(std::string image_ref, std::string description) {
    Goal g;
    g.kind = GoalKind::Image;
    g.image_ref = std::move(image_ref);
    if (!description.empty()) g.description = std::move(description);
    return g;
}

void Goal::validate() const {
    switch (kind) {
        case GoalKind::Category:
            if (!category_term || description || image_ref) {
                throw ConfigError("category goal must carry exactly a category term");
            }
            break;
        case GoalKind::Language:
            if (!description || category_term || image_ref) {
                throw ConfigError("language goal must carry exactly a description");
            }
            break;
        case GoalKind::Image:
            if (!image_ref || category_term) {
                throw ConfigError("image goal must carry an image reference");
            }
            break;
    }
}

std::string Goal::match_text() const {
    if (category_term) return *category_term;
    if (description) return *description;
    return "";
}

json Goal::to_json() const {
    json j{{"kind", msgnav::to_string(kind)}};
    if (category_term) j["category"] = *category_term;
    if (description) j["description"] = *description;
    if (image_ref) j["image"] = *image_ref;
    return j;
}

Goal Goal::from_json(const json& j) {
    Goal g;
    g.kind = goal_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("category")) g.category_term = j.at("category").get<std::string>();
    if (j.contains("description")) g.description = j.at("description").get<std::string>();
    if (j.contains("image")) g.image_ref = j.at("image").get<std::string>();
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Vocabulary

std::string fold_case(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

Vocabulary Vocabulary::from_seed_terms(const std::vector<std::string>& terms) {
    Vocabulary v;
    for (const auto& t : terms) v.add_one(t, "seed");
    return v;
}

Vocabulary Vocabulary::load_seed_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        v.add_one(line, "seed");
    }
    if (v.size() == 0) throw ConfigError("vocabulary file has no terms: " + path);
    return v;
}

int Vocabulary::add_one(const std::string& term, const std::string& provenance) {
    if (term.empty()) return 0;
    if (!folded_.insert(fold_case(term)).second) return 0;
    terms_.push_back({term, provenance});
    return 1;
}

bool Vocabulary::contains(const std::string& term) const {
    return folded_.count(fold_case(term)) > 0;
}

int Vocabulary::add_proposed(const std::vector<std::string>& terms, int step) {
    int added = 0;
    const std::string provenance = "proposed@" + std::to_string(step);
    for (const auto& t : terms) added += add_one(t, provenance);
    return added;
}

json Vocabulary::to_json() const {
    json arr = json::array();
    for (const auto& t : terms_) {
        arr.push_back(json{{"term", t.term}, {"provenance", t.provenance}});
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Choices and responses

json choice_to_json(const Choice& c) {
    if (std::holds_alternative<ChoiceTarget>(c)) {
        return json{{"target", std::get<ChoiceTarget>(c).id}};
    }
    return json{{"frontier", std::get<ChoiceFrontier>(c).id}};
}

Choice choice_from_json(const json& j) {
    const bool has_target = j.contains("target");
    const bool has_frontier = j.contains("frontier");
    if (has_target == has_frontier) {
        throw ProtocolError("choice must carry exactly one of target/frontier", j.dump());
    }
    if (has_target) return ChoiceTarget{j.at("target").get<ObjectId>()};
    return ChoiceFrontier{j.at("frontier").get<int>()};
}

json ReasonerResponse::to_json() const {
    json j{{"choice", choice_to_json(choice)}};
    if (!proposed_vocab.empty()) j["vocab"] = proposed_vocab;
    if (!rationale.empty()) j["rationale"] = rationale;
    return j;
}

ReasonerResponse ReasonerResponse::from_json(const json& j) {
    if (!j.contains("choice")) throw ProtocolError("response missing choice field", j.dump());
    ReasonerResponse r;
    r.choice = choice_from_json(j.at("choice"));
    if (j.contains("vocab")) {
        for (const auto& t : j.at("vocab")) r.proposed_vocab.push_back(t.get<std::string>());
    }
    r.rationale = j.value("rationale", "");
    return r;
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Pending: return "pending";
        case Outcome::Confirmed: return "confirmed";
        case Outcome::Refuted: return "refuted";
    }
    return "pending";
}

// ---------------------------------------------------------------------------
// DecisionMemory

void DecisionMemory::append(int step, const ReasonerResponse& response) {
    if (!entries_.empty()) {
        const Entry& last = entries_.back();
        if (step == last.step) {
            if (last.choice == response.choice && last.rationale == response.rationale) {
                return;  // replay of the same decision: no-op
            }
            throw Error("decision memory: conflicting entry for step " + std::to_string(step));
        }
        if (step < last.step) throw Error("decision memory: non-monotone step");
    }
    entries_.push_back({step, response.choice, response.rationale, Outcome::Pending});
}

void DecisionMemory::annotate(int step, Outcome outcome) {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->step != step) continue;
        if (it->outcome == outcome) return;
        if (it->outcome != Outcome::Pending) {
            throw Error("decision memory: outcome already resolved for step " +
                        std::to_string(step));
        }
        it->outcome = outcome;
        return;
    }
    throw Error("decision memory: no entry at step " + std::to_string(step));
}

json DecisionMemory::window_json(int window) const {
    json arr = json::array();
    std::size_t begin = 0;
    if (window > 0 && entries_.size() > static_cast<std::size_t>(window)) {
        begin = entries_.size() - static_cast<std::size_t>(window);
    }
    for (std::size_t i = begin; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        json je{{"step", e.step},
                {"choice", choice_to_json(e.choice)},
                {"outcome", msgnav::to_string(e.outcome)}};
        if (!e.rationale.empty()) je["rationale"] = e.rationale;
        arr.push_back(std::move(je));
    }
    return arr;
}

void apply_response(const ReasonerResponse& response, Vocabulary& vocab, DecisionMemory& memory,
                    int step) {
    vocab.add_proposed(response.proposed_vocab, step);
    memory.append(step, response);
}

// ---------------------------------------------------------------------------
// Request assembly

json FrontierView::to_json() const {
    json hist = json::object();
    for (const auto& [cat, n] : category_histogram) hist[cat] = n;
    return json{{"id", id},
                {"position", json::array({position.x, position.y, position.z})},
                {"room", room},
                {"categories", hist}};
}

json assemble_query(const json& key_payload, const DecisionMemory& memory,
                    const std::vector<FrontierView>& frontiers, const Goal& goal, int step,
                    int memory_window) {
    json fr = json::array();
    for (const auto& f : frontiers) fr.push_back(f.to_json());
    return json{{"schema_version", kRequestSchemaVersion},
                {"step", step},
                {"goal", goal.to_json()},
                {"key_subgraph", key_payload},
                {"decision_memory", memory.window_json(memory_window)},
                {"frontiers", fr}};
}

}  // namespace msgnav
