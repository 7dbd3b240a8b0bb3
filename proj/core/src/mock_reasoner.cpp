#include "msgnav/mock_reasoner.hpp"

#include <algorithm>
#include <fstream>

#include "msgnav/errors.hpp"
#include "msgnav/key_subgraph.hpp"

namespace msgnav {

using nlohmann::json;

namespace {

int match_rank(const std::string& category, const std::string& goal_text) {
    const std::string c = fold_case(category);
    const std::string g = fold_case(goal_text);
    if (c.empty() || g.empty()) return 2;
    if (c == g) return 0;
    if (g.find(c) != std::string::npos || c.find(g) != std::string::npos) return 1;
    return 2;
}

}  // namespace

MockScript MockScript::oracle_greedy() {
    MockScript s;
    s.mode = "oracle_greedy";
    s.on_exhausted = "repeat_last";
    s.focus_mode = "goal_match";
    return s;
}

MockScript MockScript::from_json(const json& j) {
    MockScript s;
    s.mode = j.value("mode", s.mode);
    if (s.mode != "script" && s.mode != "oracle_greedy") {
        throw ConfigError("mock script: unknown mode '" + s.mode + "'");
    }
    s.on_exhausted = j.value("on_exhausted", s.on_exhausted);
    if (s.on_exhausted != "error" && s.on_exhausted != "repeat_last") {
        throw ConfigError("mock script: unknown on_exhausted policy");
    }
    if (j.contains("focus")) {
        const json& f = j.at("focus");
        s.focus_mode = f.value("mode", s.focus_mode);
        if (s.focus_mode != "goal_match" && s.focus_mode != "ids" && s.focus_mode != "empty") {
            throw ConfigError("mock script: unknown focus mode");
        }
        if (f.contains("ids")) {
            for (const auto& [step, ids] : f.at("ids").items()) {
                s.focus_ids[std::stoi(step)] = ids.get<std::vector<ObjectId>>();
            }
        }
    }
    if (j.contains("decisions")) {
        for (const auto& d : j.at("decisions")) {
            // validate now so a malformed script fails at load, not mid-run
            ReasonerResponse::from_json(d);
            s.decisions.push_back(d);
        }
    }
    if (s.mode == "script" && s.decisions.empty()) {
        throw ConfigError("mock script: script mode requires decisions");
    }
    return s;
}

MockScript MockScript::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("mock script parse error: " + std::string(e.what()));
    }
    return from_json(j);
}

MockReasoner::MockReasoner(MockScript script) : script_(std::move(script)) {}

std::vector<ObjectId> MockReasoner::oracle_focus(const FocusRequest& request) const {
    std::vector<std::pair<int, ObjectId>> ranked;
    for (const auto& [id, category] : request.graph->nodes) {
        const int rank = match_rank(category, request.goal.match_text());
        if (rank < 2) ranked.emplace_back(rank, id);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<ObjectId> out;
    for (const auto& [rank, id] : ranked) {
        if (static_cast<int>(out.size()) >= request.k) break;
        out.push_back(id);
    }
    return out;
}

std::vector<ObjectId> MockReasoner::focus(const FocusRequest& request) {
    focus_log_.push_back(json{{"step", request.step},
                              {"k", request.k},
                              {"goal", request.goal.to_json()},
                              {"nodes", static_cast<int>(request.graph->nodes.size())}});
    if (script_.mode == "oracle_greedy" || script_.focus_mode == "goal_match") {
        return oracle_focus(request);
    }
    if (script_.focus_mode == "ids") {
        auto it = script_.focus_ids.find(request.step);
        if (it != script_.focus_ids.end()) return it->second;
    }
    return {};
}

ReasonerResponse MockReasoner::oracle_decide(const json& request) const {
    const std::string goal_text = Goal::from_json(request.at("goal")).match_text();

    // A key object whose category matches the goal wins outright.
    // Objects arrive in ascending id order, so strict '<' keeps the
    // lowest matching id.
    int best_rank = 2;
    ObjectId best_id = 0;
    ObjectId lowest_id = 0;
    bool any_object = false;
    for (const auto& obj : request.at("key_subgraph").at("objects")) {
        const auto id = obj.at("id").get<ObjectId>();
        if (!any_object) lowest_id = id;
        any_object = true;
        const int rank = match_rank(obj.at("category").get<std::string>(), goal_text);
        if (rank < best_rank) {
            best_rank = rank;
            best_id = id;
        }
    }
    if (best_rank < 2) {
        ReasonerResponse r;
        r.choice = ChoiceTarget{best_id};
        r.rationale = "goal category present in key subgraph";
        return r;
    }

    // Otherwise explore: a frontier whose snapshot mentions the goal, else
    // the largest frontier (id 0 in extraction order).
    const auto& frontiers = request.at("frontiers");
    int best_frontier = -1;
    int best_frontier_rank = 2;
    for (const auto& f : frontiers) {
        for (const auto& [cat, n] : f.at("categories").items()) {
            const int rank = match_rank(cat, goal_text);
            if (rank < best_frontier_rank) {
                best_frontier_rank = rank;
                best_frontier = f.at("id").get<int>();
            }
        }
    }
    ReasonerResponse r;
    if (best_frontier >= 0) {
        r.choice = ChoiceFrontier{best_frontier};
        r.rationale = "goal category seen toward frontier";
        return r;
    }
    if (!frontiers.empty()) {
        r.choice = ChoiceFrontier{frontiers.front().at("id").get<int>()};
        r.rationale = "exploring largest frontier";
        return r;
    }
    if (any_object) {
        r.choice = ChoiceTarget{lowest_id};
        r.rationale = "map explored; stopping at a known object";
        return r;
    }
    throw ProtocolError("oracle reasoner: no frontiers and no key objects to choose from");
}

ReasonerResponse MockReasoner::decide(const json& request) {
    decide_log_.push_back(request);
    if (script_.mode == "oracle_greedy") return oracle_decide(request);

    if (next_decision_ >= script_.decisions.size()) {
        if (script_.on_exhausted == "repeat_last" && !script_.decisions.empty()) {
            return ReasonerResponse::from_json(script_.decisions.back());
        }
        throw ProtocolError("mock script exhausted after " +
                            std::to_string(script_.decisions.size()) + " decisions");
    }
    return ReasonerResponse::from_json(script_.decisions[next_decision_++]);
}

}  // namespace msgnav
