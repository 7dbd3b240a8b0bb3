#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "msgnav/scene_graph.hpp"

namespace msgnav {

enum class GoalKind { Category, Language, Image };

std::string to_string(GoalKind k);
GoalKind goal_kind_from_string(const std::string& s);

/// Navigation target: a category name, a free-text description, or a
/// reference image handle. Exactly the field implied by the kind is set.
struct Goal {
    GoalKind kind = GoalKind::Category;
    std::optional<std::string> category_term;
    std::optional<std::string> description;
    std::optional<std::string> image_ref;

    static Goal category(std::string term);
    static Goal language(std::string description);
    static Goal image(std::string image_ref, std::string description = "");

    void validate() const;
    /// Text used for category matching fallbacks: the category term, the
    /// description, or the image goal's description.
    std::string match_text() const;

    nlohmann::json to_json() const;
    static Goal from_json(const nlohmann::json& j);
};

/// Detector category list. Case-folded dedup, insertion-ordered, grows
/// monotonically; seed terms are never removed.
class Vocabulary {
public:
    struct Term {
        std::string term;
        std::string provenance;  // "seed" or "proposed@<step>"
    };

    Vocabulary() = default;
    static Vocabulary from_seed_terms(const std::vector<std::string>& terms);
    /// Loads one term per line; '#' lines and blanks ignored.
    static Vocabulary load_seed_file(const std::string& path);

    bool contains(const std::string& term) const;
    std::size_t size() const { return terms_.size(); }
    const std::vector<Term>& terms() const { return terms_; }

    /// Adds novel terms (case-folded dedup) with provenance proposed@step.
    /// Returns how many were actually new. Idempotent.
    int add_proposed(const std::vector<std::string>& terms, int step);

    nlohmann::json to_json() const;

private:
    int add_one(const std::string& term, const std::string& provenance);

    std::vector<Term> terms_;
    std::set<std::string> folded_;
};

std::string fold_case(const std::string& s);

struct ChoiceTarget {
    ObjectId id = 0;
    bool operator==(const ChoiceTarget& o) const { return id == o.id; }
};
struct ChoiceFrontier {
    int id = 0;
    bool operator==(const ChoiceFrontier& o) const { return id == o.id; }
};
using Choice = std::variant<ChoiceTarget, ChoiceFrontier>;

nlohmann::json choice_to_json(const Choice& c);
Choice choice_from_json(const nlohmann::json& j);

/// One reasoner reply: the chosen target object or frontier, plus any
/// vocabulary the reasoner wants added, plus free-text rationale.
struct ReasonerResponse {
    Choice choice;
    std::vector<std::string> proposed_vocab;
    std::string rationale;

    nlohmann::json to_json() const;
    static ReasonerResponse from_json(const nlohmann::json& j);
};

enum class Outcome { Pending, Confirmed, Refuted };
std::string to_string(Outcome o);

/// Append-only record of past decisions. The (step, choice, rationale)
/// payload of an entry never changes; the outcome resolves from Pending
/// exactly once, when the episode loop learns how the action went.
class DecisionMemory {
public:
    struct Entry {
        int step = 0;
        Choice choice;
        std::string rationale;
        Outcome outcome = Outcome::Pending;
    };

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Appends (step, response). Steps must be strictly increasing;
    /// re-applying the identical response at the same step is a no-op.
    void append(int step, const ReasonerResponse& response);

    /// Resolves the outcome of the entry recorded at `step`.
    void annotate(int step, Outcome outcome);

    /// The last `window` entries as request-schema JSON (all if window<=0).
    nlohmann::json window_json(int window) const;

private:
    std::vector<Entry> entries_;
};

/// Applies one reasoner response: vocabulary gains novel proposed terms and
/// the memory appends the decision. Idempotent for a repeat of the same
/// (response, step).
void apply_response(const ReasonerResponse& response, Vocabulary& vocab, DecisionMemory& memory,
                    int step);

/// Frontier summary as shown to the reasoner.
struct FrontierView {
    int id = 0;
    Point3 position;
    std::string room;
    std::map<std::string, int> category_histogram;

    nlohmann::json to_json() const;
};

inline constexpr int kRequestSchemaVersion = 1;

/// The full per-step reasoner request: key subgraph payload, windowed
/// decision memory, frontiers, goal and step. Pure function of its inputs.
nlohmann::json assemble_query(const nlohmann::json& key_payload, const DecisionMemory& memory,
                              const std::vector<FrontierView>& frontiers, const Goal& goal,
                              int step, int memory_window);

struct CompactGraph;  // key_subgraph.hpp

struct FocusRequest {
    const CompactGraph* graph = nullptr;
    Goal goal;
    int k = 5;
    int step = 0;
};

/// Abstract decision brain. focus() answers the top-k relevance query over
/// the compact graph; decide() answers the full exploration query.
class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual std::vector<ObjectId> focus(const FocusRequest& request) = 0;
    virtual ReasonerResponse decide(const nlohmann::json& request) = 0;
};

}  // namespace msgnav
