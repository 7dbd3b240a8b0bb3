#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "msgnav/key_subgraph.hpp"
#include "msgnav/reasoning.hpp"
#include "msgnav/scene.hpp"
#include "msgnav/sim.hpp"
#include "msgnav/viewpoint.hpp"

namespace msgnav {

struct EpisodeParams {
    GraphParams graph;
    VvdParams vvd;
    SensorParams sensor;
    NoiseParams noise;

    double success_d = 0.25;       // agent-to-viewpoint success threshold
    double viewpoint_radius = 2.0; // object-to-viewpoint radius of the GT set
    int max_steps = 50;            // T, decision rounds
    bool vvd_enabled = true;
    int focus_k = 5;
    int memory_window = 10;
    double clearance = 0.2;
    int min_frontier_cluster = 2;
    double frontier_peek_radius = 3.0;
    int look_headings = 4;  // panorama sweep per decision round
    std::uint64_t seed = 0;

    ViewpointGtParams viewpoint_gt() const {
        return {viewpoint_radius, vvd.camera_height, sensor.los_tau, clearance};
    }

    nlohmann::json to_json() const;
    static EpisodeParams from_json(const nlohmann::json& j);
};

struct AgentState {
    Point3 position;  // ground (y = 0)
    double heading = 0.0;
    double path_length = 0.0;  // l_a so far
    int step = 0;
};

struct EpisodeOutcome {
    EpisodeResult result;
    nlohmann::json transcript;
};

/// Runs goals against one scene while persisting the scene graph, the
/// vocabulary, the explored map and the agent pose across goals (the
/// lifelong setting). Decision memory resets per goal.
class EpisodeSession {
public:
    EpisodeSession(const SyntheticScene& scene, EpisodeParams params, Vocabulary vocab);

    EpisodeOutcome run_goal(const SceneGoal& goal, Reasoner& reasoner);

    const SceneGraph& graph() const { return graph_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const AgentState& agent() const { return agent_; }

private:
    struct LegOutcome {
        bool reached_success = false;
        bool completed = false;
        double moved_m = 0.0;
    };

    void look_around();
    double nearest_viewpoint_distance(const std::vector<Point3>& viewpoints) const;
    LegOutcome walk(const PathResult& path, const std::vector<Point3>& viewpoints,
                    nlohmann::json* trace);

    const SyntheticScene& scene_;
    EpisodeParams params_;
    Vocabulary vocab_;
    SceneGraph graph_;
    OccupancyGrid known_;
    AgentState agent_;
    DetRng rng_;
    std::int64_t frame_counter_ = 0;
};

/// One-shot episode: fresh session, one goal.
EpisodeOutcome run_episode(const SyntheticScene& scene, const SceneGoal& goal,
                           Reasoner& reasoner, const EpisodeParams& params,
                           const Vocabulary& seed_vocab);

}  // namespace msgnav
