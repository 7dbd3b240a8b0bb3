#include "msgnav/episode.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "msgnav/errors.hpp"

namespace msgnav {

using nlohmann::json;

json EpisodeParams::to_json() const {
    return json{{"graph", graph.to_json()},
                {"vvd_params", vvd.to_json()},
                {"sensor", sensor.to_json()},
                {"noise", noise.to_json()},
                {"success_d", success_d},
                {"viewpoint_radius", viewpoint_radius},
                {"max_steps", max_steps},
                {"vvd", vvd_enabled},
                {"focus_k", focus_k},
                {"memory_window", memory_window},
                {"clearance", clearance},
                {"min_frontier_cluster", min_frontier_cluster},
                {"frontier_peek_radius", frontier_peek_radius},
                {"look_headings", look_headings},
                {"seed", seed}};
}

EpisodeParams EpisodeParams::from_json(const json& j) {
    EpisodeParams p;
    if (j.contains("graph")) p.graph = GraphParams::from_json(j.at("graph"));
    if (j.contains("vvd_params")) p.vvd = VvdParams::from_json(j.at("vvd_params"));
    if (j.contains("sensor")) p.sensor = SensorParams::from_json(j.at("sensor"));
    if (j.contains("noise")) p.noise = NoiseParams::from_json(j.at("noise"));
    p.success_d = j.value("success_d", p.success_d);
    p.viewpoint_radius = j.value("viewpoint_radius", p.viewpoint_radius);
    p.max_steps = j.value("max_steps", p.max_steps);
    p.vvd_enabled = j.value("vvd", p.vvd_enabled);
    p.focus_k = j.value("focus_k", p.focus_k);
    p.memory_window = j.value("memory_window", p.memory_window);
    p.clearance = j.value("clearance", p.clearance);
    p.min_frontier_cluster = j.value("min_frontier_cluster", p.min_frontier_cluster);
    p.frontier_peek_radius = j.value("frontier_peek_radius", p.frontier_peek_radius);
    p.look_headings = j.value("look_headings", p.look_headings);
    p.seed = j.value("seed", p.seed);
    return p;
}

namespace {

std::string hash_hex(const std::string& s) {
    std::ostringstream out;
    out << std::hex << fnv1a(s);
    return out.str();
}

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

}  // namespace

EpisodeSession::EpisodeSession(const SyntheticScene& scene, EpisodeParams params,
                               Vocabulary vocab)
    : scene_(scene),
      params_(std::move(params)),
      vocab_(std::move(vocab)),
      graph_(params_.graph),
      known_(scene.grid.origin(), scene.grid.cell_size(), scene.grid.cols(), scene.grid.rows(),
             CellState::Unknown),
      rng_(params_.seed) {
    params_.vvd.subsample_seed = params_.seed;
    agent_.position = {scene.agent_start.position.x, 0.0, scene.agent_start.position.z};
    agent_.heading = scene.agent_start.heading;
    if (!scene.grid.is_traversable(agent_.position, params_.clearance)) {
        throw ConfigError("scene '" + scene.name + "': agent start is not traversable");
    }
}

void EpisodeSession::look_around() {
    for (int h = 0; h < params_.look_headings; ++h) {
        const double heading =
            agent_.heading + 2.0 * std::numbers::pi * h / params_.look_headings;
        CameraPose eye;
        eye.position = {agent_.position.x, params_.vvd.camera_height, agent_.position.z};
        eye.heading = heading;
        ++frame_counter_;
        std::ostringstream ref;
        ref << "f" << std::setw(6) << std::setfill('0') << frame_counter_;
        const FrameObservation obs =
            render_frame(scene_, eye, params_.sensor, params_.noise, rng_, frame_counter_,
                         ref.str(), params_.graph.embedding_dim);
        graph_.update(obs, vocab_, scene_.rooms);
    }
    reveal_visible(scene_, known_, agent_.position, params_.sensor.max_range);
}

double EpisodeSession::nearest_viewpoint_distance(const std::vector<Point3>& viewpoints) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& vp : viewpoints) {
        best = std::min(best, agent_.position.ground_distance_to(vp));
    }
    return best;
}

// The within-d success condition is evaluated at leg and round boundaries,
// not per cell: an agent that merely passes through the success region
// mid-leg has not decided to stop there (that near-miss is the last-mile
// failure this system exists to fix).
EpisodeSession::LegOutcome EpisodeSession::walk(const PathResult& path,
                                                const std::vector<Point3>& viewpoints,
                                                json* trace) {
    LegOutcome leg;
    for (std::size_t i = 1; i < path.cells.size(); ++i) {
        const GridIndex prev = path.cells[i - 1];
        const GridIndex cur = path.cells[i];
        const bool diagonal = prev.col != cur.col && prev.row != cur.row;
        const double cost = (diagonal ? std::numbers::sqrt2 : 1.0) * scene_.grid.cell_size();
        const Point3 next = scene_.grid.center_of(cur);
        agent_.heading = std::atan2(next.z - agent_.position.z, next.x - agent_.position.x);
        agent_.position = next;
        agent_.path_length += cost;
        leg.moved_m += cost;
        if (trace) trace->push_back(point_json(agent_.position));
    }
    leg.completed = true;
    leg.reached_success = nearest_viewpoint_distance(viewpoints) <= params_.success_d;
    return leg;
}

EpisodeOutcome EpisodeSession::run_goal(const SceneGoal& goal, Reasoner& reasoner) {
    goal.goal.validate();
    const std::vector<Point3>& viewpoints =
        scene_.success_viewpoints(goal.target_id, params_.viewpoint_gt());
    if (viewpoints.empty()) {
        throw ConfigError("scene '" + scene_.name + "': goal '" + goal.name +
                          "' has no ground-truth success viewpoint");
    }

    // l_s: shortest path from the start to the success region (any cell
    // within success_d of a viewpoint).
    const auto dist_from_start =
        distance_field(scene_.grid, scene_.grid.index_of(agent_.position), params_.clearance);
    double l_s = std::numeric_limits<double>::infinity();
    for (int row = 0; row < scene_.grid.rows(); ++row) {
        for (int col = 0; col < scene_.grid.cols(); ++col) {
            const std::size_t flat = static_cast<std::size_t>(row) * scene_.grid.cols() + col;
            if (!std::isfinite(dist_from_start[flat])) continue;
            const Point3 c = scene_.grid.center_of({col, row});
            for (const auto& vp : viewpoints) {
                if (c.ground_distance_to(vp) <= params_.success_d) {
                    l_s = std::min(l_s, dist_from_start[flat]);
                    break;
                }
            }
        }
    }
    if (!std::isfinite(l_s)) {
        throw ConfigError("scene '" + scene_.name + "': goal '" + goal.name +
                          "' success region unreachable from start");
    }

    EpisodeResult result;
    result.scene = scene_.name;
    result.goal_name = goal.name;
    result.kind = goal.goal.kind;
    result.shortest_path_m = l_s;

    DecisionMemory memory;
    json steps = json::array();
    const double path_len_at_start = agent_.path_length;
    bool stopped = false;
    bool reasoner_failed = false;
    std::string failure;
    int rounds = 0;

    for (int t = 1; t <= params_.max_steps && !stopped; ++t) {
        rounds = t;
        look_around();

        json step_rec{{"t", t}, {"position", point_json(agent_.position)}};
        if (nearest_viewpoint_distance(viewpoints) <= params_.success_d) {
            step_rec["action"] = json{{"kind", "stop"}, {"reason", "within threshold"}};
            steps.push_back(std::move(step_rec));
            stopped = true;
            break;
        }

        auto frontiers = extract_frontiers(known_, params_.min_frontier_cluster);
        annotate_frontiers(frontiers, scene_, params_.frontier_peek_radius);
        const auto views = frontier_views(frontiers);

        const CompactGraph compact = compress(graph_);
        FocusDiagnostics focus_diag;
        const std::set<ObjectId> related =
            focus(compact, goal.goal, reasoner, params_.focus_k, t, &focus_diag);
        const KeySubgraph key = greedy_prune(graph_, related);
        const json payload = assemble_key_prompt(key, graph_);
        const json request =
            assemble_query(payload, memory, views, goal.goal, t, params_.memory_window);

        step_rec["graph"] = json{{"objects", graph_.object_count()},
                                 {"edges", graph_.edge_count()},
                                 {"dropped_detections", graph_.dropped_detections()}};
        step_rec["key"] = json{{"related", related.size()},
                               {"objects", key.key_objects.size()},
                               {"images", payload.at("image_count").get<int>()},
                               {"key_section_chars", payload.dump().size()},
                               {"full_graph_chars", full_graph_prompt_chars(graph_)},
                               {"prompt_chars", request.dump().size()}};
        step_rec["focus"] = json{{"fallback", focus_diag.used_fallback},
                                 {"discarded", focus_diag.discarded.size()}};
        step_rec["frontiers"] = views.size();
        step_rec["request_hash"] = hash_hex(request.dump());

        ReasonerResponse response;
        try {
            response = reasoner.decide(request);
        } catch (const ProtocolError& e) {
            failure = std::string("reasoner error: ") + e.what();
            reasoner_failed = true;
        } catch (const TransportError& e) {
            failure = std::string("reasoner error: ") + e.what();
            reasoner_failed = true;
        }
        if (reasoner_failed) {
            step_rec["action"] = json{{"kind", "abort"}, {"reason", failure}};
            steps.push_back(std::move(step_rec));
            break;
        }

        apply_response(response, vocab_, memory, t);
        step_rec["response_hash"] = hash_hex(response.to_json().dump());
        step_rec["response"] = response.to_json();

        json action;
        json walk_trace = json::array();
        if (std::holds_alternative<ChoiceFrontier>(response.choice)) {
            const int fid = std::get<ChoiceFrontier>(response.choice).id;
            const Frontier* chosen = nullptr;
            for (const auto& f : frontiers) {
                if (f.id == fid) chosen = &f;
            }
            action["kind"] = "frontier";
            action["id"] = fid;
            if (!chosen) {
                memory.annotate(t, Outcome::Refuted);
                action["error"] = "unknown frontier id";
            } else {
                const auto path = plan_path(scene_.grid, scene_.grid.index_of(agent_.position),
                                            chosen->cell, params_.clearance);
                if (!path) {
                    memory.annotate(t, Outcome::Refuted);
                    action["error"] = "frontier unreachable";
                } else {
                    const LegOutcome leg = walk(*path, viewpoints, &walk_trace);
                    action["moved_m"] = leg.moved_m;
                    memory.annotate(t, Outcome::Confirmed);
                    if (leg.reached_success) stopped = true;
                }
            }
        } else {
            const ObjectId oid = std::get<ChoiceTarget>(response.choice).id;
            action["kind"] = "target";
            action["id"] = oid;
            if (!graph_.has_object(oid)) {
                memory.annotate(t, Outcome::Refuted);
                action["error"] = "unknown object id";
            } else {
                const ObjectNode& node = graph_.object(oid);
                const PointCloud occluders = scene_.occluders_excluding(node.cloud);
                const GridIndex agent_cell = scene_.grid.index_of(agent_.position);

                std::optional<PathResult> path;
                if (params_.vvd_enabled) {
                    try {
                        std::vector<ViewpointCandidate> scored;
                        decide_viewpoint_full(node.cloud, occluders, scene_.grid, params_.vvd,
                                              &scored);
                        // best-scoring reachable candidate; scored is in
                        // (ring, angle) order so stable_sort keeps the
                        // tie-break.
                        std::stable_sort(scored.begin(), scored.end(),
                                         [](const ViewpointCandidate& a,
                                            const ViewpointCandidate& b) {
                                             return a.score > b.score;
                                         });
                        for (const auto& cand : scored) {
                            path = plan_path(scene_.grid, agent_cell,
                                             scene_.grid.index_of(cand.position),
                                             params_.clearance);
                            if (path) {
                                action["viewpoint"] = cand.to_json();
                                break;
                            }
                        }
                    } catch (const NoViewpointError&) {
                        action["viewpoint_fallback"] = "no traversable candidate";
                    }
                }
                if (!path) {
                    // pre-VVD behavior: nearest traversable (reachable)
                    // position to the believed target
                    double best = std::numeric_limits<double>::infinity();
                    GridIndex dest{-1, -1};
                    const auto reach =
                        distance_field(scene_.grid, agent_cell, params_.clearance);
                    for (int row = 0; row < scene_.grid.rows(); ++row) {
                        for (int col = 0; col < scene_.grid.cols(); ++col) {
                            const std::size_t flat =
                                static_cast<std::size_t>(row) * scene_.grid.cols() + col;
                            if (!std::isfinite(reach[flat])) continue;
                            const double d = scene_.grid.center_of({col, row})
                                                 .ground_distance_to(node.position);
                            if (d < best) {
                                best = d;
                                dest = {col, row};
                            }
                        }
                    }
                    if (dest.col >= 0) {
                        path = plan_path(scene_.grid, agent_cell, dest, params_.clearance);
                        action["nearest_traversable"] = true;
                    }
                }

                if (!path) {
                    memory.annotate(t, Outcome::Refuted);
                    action["error"] = "target unreachable";
                } else {
                    const LegOutcome leg = walk(*path, viewpoints, &walk_trace);
                    action["moved_m"] = leg.moved_m;
                    stopped = true;  // explicit stop after the final approach
                    const bool ok =
                        nearest_viewpoint_distance(viewpoints) <= params_.success_d;
                    memory.annotate(t, ok ? Outcome::Confirmed : Outcome::Refuted);
                }
            }
        }
        action["position"] = point_json(agent_.position);
        step_rec["action"] = std::move(action);
        if (!walk_trace.empty()) step_rec["walk"] = std::move(walk_trace);
        steps.push_back(std::move(step_rec));
    }

    result.steps_used = rounds;
    result.agent_path_m = agent_.path_length - path_len_at_start;
    result.stop_position = agent_.position;
    result.dist_to_nearest_viewpoint = nearest_viewpoint_distance(viewpoints);
    result.success = result.dist_to_nearest_viewpoint <= params_.success_d;
    if (!result.success) {
        if (!failure.empty()) {
            result.failure_reason = failure;
        } else if (stopped) {
            result.failure_reason = "stopped beyond threshold";
        } else {
            result.failure_reason = "step budget exhausted";
        }
    }

    EpisodeOutcome outcome;
    outcome.result = result;
    outcome.transcript = json{{"format_version", 1},
                              {"scene", scene_.name},
                              {"goal", json{{"name", goal.name},
                                            {"target_id", goal.target_id},
                                            {"spec", goal.goal.to_json()}}},
                              {"seed", params_.seed},
                              {"vvd", params_.vvd_enabled},
                              {"params", params_.to_json()},
                              {"steps", std::move(steps)},
                              {"result", result.to_json()}};
    return outcome;
}

EpisodeOutcome run_episode(const SyntheticScene& scene, const SceneGoal& goal,
                           Reasoner& reasoner, const EpisodeParams& params,
                           const Vocabulary& seed_vocab) {
    EpisodeSession session(scene, params, seed_vocab);
    return session.run_goal(goal, reasoner);
}

}  // namespace msgnav
