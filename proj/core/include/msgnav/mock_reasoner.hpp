#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "msgnav/reasoning.hpp"

namespace msgnav {

/// Canned behavior for a MockReasoner.
///
/// mode "script": decisions are consumed in order from `decisions`; focus
/// answers come from `focus_ids` keyed by step (missing step -> empty,
/// which exercises the caller's fallback) unless focus_mode is
/// "goal_match".
///
/// mode "oracle_greedy": decisions are computed from the request itself —
/// pick the key object whose category matches the goal text, else the
/// best-matching frontier, else the largest frontier. Reproduces a
/// deterministic oracle-greedy agent for suites and demos.
struct MockScript {
    std::string mode = "script";
    std::string on_exhausted = "error";  // or "repeat_last"
    std::string focus_mode = "goal_match";  // or "ids" / "empty"
    std::map<int, std::vector<ObjectId>> focus_ids;
    std::vector<nlohmann::json> decisions;

    static MockScript oracle_greedy();
    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::string& path);
};

/// Scripted reasoner for deterministic tests and desk-scale runs. Records
/// every request it sees.
class MockReasoner : public Reasoner {
public:
    explicit MockReasoner(MockScript script);

    std::vector<ObjectId> focus(const FocusRequest& request) override;
    ReasonerResponse decide(const nlohmann::json& request) override;

    const std::vector<nlohmann::json>& recorded_decide_requests() const { return decide_log_; }
    const std::vector<nlohmann::json>& recorded_focus_requests() const { return focus_log_; }

private:
    ReasonerResponse oracle_decide(const nlohmann::json& request) const;
    std::vector<ObjectId> oracle_focus(const FocusRequest& request) const;

    MockScript script_;
    std::size_t next_decision_ = 0;
    std::vector<nlohmann::json> decide_log_;
    std::vector<nlohmann::json> focus_log_;
};

}  // namespace msgnav
