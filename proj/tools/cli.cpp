#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "msgnav/errors.hpp"
#include "msgnav/http_reasoner.hpp"
#include "msgnav/key_subgraph.hpp"
#include "msgnav/mock_reasoner.hpp"
#include "msgnav/scene.hpp"
#include "msgnav/viewpoint.hpp"

namespace msgnav::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& context) {
    if (!j.is_object()) throw ConfigError("config: '" + context + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("config: unknown key '" + key + "' in " + context);
        }
    }
}

json load_json_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + what + ": " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(what + " parse error in " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    out << text;
}

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

json metrics_json(const Metrics& m) {
    return json{{"sr", m.sr}, {"spl", m.spl}, {"count", m.count}};
}

}  // namespace

void apply_config_file(RunOptions& opts, const std::string& path) {
    const json j = load_json_file(path, "run config");
    reject_unknown(j, {"scenes", "goals", "reasoner", "vvd", "seed", "out", "jobs", "lifelong",
                       "vocab", "params"},
                   "top level");
    if (j.contains("params")) {
        const json& p = j.at("params");
        reject_unknown(p,
                       {"graph", "vvd_params", "sensor", "noise", "success_d",
                        "viewpoint_radius", "max_steps", "focus_k", "memory_window", "clearance",
                        "min_frontier_cluster", "frontier_peek_radius", "look_headings"},
                       "params");
        if (p.contains("graph")) {
            reject_unknown(p.at("graph"),
                           {"adjacency_threshold", "iou_min", "match_dist", "sim_min",
                            "min_confidence", "dedup_voxel", "embedding_dim"},
                           "params.graph");
        }
        if (p.contains("vvd_params")) {
            reject_unknown(p.at("vvd_params"),
                           {"radii", "samples_per_ring", "camera_height",
                            "obstruction_distance", "clearance", "step", "max_target_points"},
                           "params.vvd_params");
        }
        if (p.contains("sensor")) {
            reject_unknown(p.at("sensor"), {"fov_deg", "max_range", "los_tau"}, "params.sensor");
        }
        if (p.contains("noise")) {
            reject_unknown(p.at("noise"), {"p_miss", "sigma_pos", "p_flip", "sigma_emb"},
                           "params.noise");
        }
        opts.params = EpisodeParams::from_json(p);
    }
    if (j.contains("scenes")) opts.scenes = j.at("scenes").get<std::vector<std::string>>();
    if (j.contains("goals")) opts.goal_filter = j.at("goals").get<std::vector<std::string>>();
    if (j.contains("reasoner")) opts.reasoner = j.at("reasoner").get<std::string>();
    if (j.contains("vvd")) opts.vvd = j.at("vvd").get<bool>();
    if (j.contains("seed")) opts.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) opts.out_dir = j.at("out").get<std::string>();
    if (j.contains("jobs")) opts.jobs = j.at("jobs").get<int>();
    if (j.contains("lifelong")) opts.lifelong = j.at("lifelong").get<bool>();
    if (j.contains("vocab")) opts.vocab_path = j.at("vocab").get<std::string>();
}

std::unique_ptr<Reasoner> make_reasoner(const std::string& spec) {
    if (spec == "oracle") {
        return std::make_unique<MockReasoner>(MockScript::oracle_greedy());
    }
    if (spec.rfind("mock:", 0) == 0) {
        return std::make_unique<MockReasoner>(MockScript::load(spec.substr(5)));
    }
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        HttpReasonerConfig cfg;
        cfg.endpoint = spec;
        return std::make_unique<HttpReasoner>(cfg);
    }
    throw ConfigError("unknown reasoner spec '" + spec +
                      "' (expected oracle, mock:<path>, or http(s)://...)");
}

Vocabulary load_vocabulary(const std::string& vocab_path) {
    const std::string path =
        vocab_path.empty() ? default_data_dir() + "/vocab/scannet200.txt" : vocab_path;
    return Vocabulary::load_seed_file(path);
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const RunOptions& opts, std::ostream& out) {
    if (opts.scenes.empty()) throw ConfigError("run: at least one --scene required");
    if (opts.out_dir.empty()) throw ConfigError("run: --out directory required");
    if (opts.jobs < 1) throw ConfigError("run: --jobs must be >= 1");

    const Vocabulary vocab = load_vocabulary(opts.vocab_path);

    // Load and validate everything before writing any output.
    std::vector<SyntheticScene> scenes;
    for (const auto& path : opts.scenes) scenes.push_back(SyntheticScene::load(path));
    make_reasoner(opts.reasoner);  // fails fast on a bad spec/script

    struct EpisodeSpec {
        std::size_t scene_index;
        const SceneGoal* goal;
    };
    std::vector<EpisodeSpec> episodes;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        for (const auto& goal : scenes[si].goals) {
            if (!opts.goal_filter.empty() &&
                std::find(opts.goal_filter.begin(), opts.goal_filter.end(), goal.name) ==
                    opts.goal_filter.end()) {
                continue;
            }
            episodes.push_back({si, &goal});
        }
    }
    if (episodes.empty()) throw ConfigError("run: no episodes selected (check goals filter)");

    std::vector<EpisodeResult> results(episodes.size());
    std::vector<json> transcripts(episodes.size());

    const auto episode_params = [&](std::size_t index) {
        EpisodeParams p = opts.params;
        p.vvd_enabled = opts.vvd;
        p.seed = opts.seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
        return p;
    };

    if (opts.lifelong) {
        // One persistent session per scene; goals run in file order.
        std::size_t index = 0;
        for (std::size_t si = 0; si < scenes.size(); ++si) {
            std::vector<std::size_t> scene_eps;
            for (std::size_t i = 0; i < episodes.size(); ++i) {
                if (episodes[i].scene_index == si) scene_eps.push_back(i);
            }
            if (scene_eps.empty()) continue;
            EpisodeSession session(scenes[si], episode_params(index), vocab);
            for (std::size_t i : scene_eps) {
                auto reasoner = make_reasoner(opts.reasoner);
                EpisodeOutcome outcome = session.run_goal(*episodes[i].goal, *reasoner);
                results[i] = outcome.result;
                transcripts[i] = std::move(outcome.transcript);
                ++index;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        const auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= episodes.size()) return;
                try {
                    auto reasoner = make_reasoner(opts.reasoner);
                    EpisodeOutcome outcome =
                        run_episode(scenes[episodes[i].scene_index], *episodes[i].goal,
                                    *reasoner, episode_params(i), vocab);
                    results[i] = outcome.result;
                    transcripts[i] = std::move(outcome.transcript);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        const int n_threads = std::min<int>(opts.jobs, static_cast<int>(episodes.size()));
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    // Outputs: machine-readable results + transcripts, human summary.
    fs::create_directories(fs::path(opts.out_dir) / "transcripts");
    for (std::size_t i = 0; i < transcripts.size(); ++i) {
        std::ostringstream name;
        name << "ep_" << std::setw(3) << std::setfill('0') << i << ".json";
        write_text_file(fs::path(opts.out_dir) / "transcripts" / name.str(),
                        dump_pretty(transcripts[i]));
    }

    const Metrics overall = compute_metrics(results);
    json by_kind = json::object();
    std::ostringstream kind_summary;
    for (GoalKind kind : {GoalKind::Category, GoalKind::Language, GoalKind::Image}) {
        std::vector<EpisodeResult> subset;
        for (const auto& r : results) {
            if (r.kind == kind) subset.push_back(r);
        }
        if (subset.empty()) continue;
        const Metrics m = compute_metrics(subset);
        by_kind[to_string(kind)] = metrics_json(m);
        kind_summary << "  " << std::left << std::setw(9) << to_string(kind) << " SR "
                     << std::fixed << std::setprecision(3) << m.sr << "  SPL " << m.spl << "  (n="
                     << m.count << ")\n";
    }

    json episodes_json = json::array();
    for (const auto& r : results) episodes_json.push_back(r.to_json());
    const json results_doc{{"format_version", 1},
                           {"reasoner", opts.reasoner},
                           {"vvd", opts.vvd},
                           {"seed", opts.seed},
                           {"lifelong", opts.lifelong},
                           {"episodes", episodes_json},
                           {"metrics", json{{"overall", metrics_json(overall)},
                                            {"by_kind", by_kind}}}};
    write_text_file(fs::path(opts.out_dir) / "results.json", dump_pretty(results_doc));

    std::ostringstream summary;
    summary << "episodes: " << results.size() << "  reasoner: " << opts.reasoner << "  vvd: "
            << (opts.vvd ? "on" : "off") << "  seed: " << opts.seed << "\n";
    summary << "overall   SR " << std::fixed << std::setprecision(3) << overall.sr << "  SPL "
            << overall.spl << "  (n=" << overall.count << ")\n";
    summary << kind_summary.str();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        summary << std::setw(3) << i << "  " << r.scene << "/" << r.goal_name << "  "
                << (r.success ? "success" : "failure") << "  l_s=" << std::setprecision(2)
                << r.shortest_path_m << " l_a=" << r.agent_path_m << " steps=" << r.steps_used;
        if (!r.failure_reason.empty()) summary << "  (" << r.failure_reason << ")";
        summary << "\n";
    }
    write_text_file(fs::path(opts.out_dir) / "summary.txt", summary.str());
    out << summary.str();
    return kOk;
}

// ---------------------------------------------------------------------------
// graph

int cmd_graph(const GraphOptions& opts, std::ostream& out) {
    if (opts.scene_path.empty() || opts.trajectory_path.empty() || opts.out_path.empty()) {
        throw ConfigError("graph: --scene, --trajectory and --out are required");
    }
    const SyntheticScene scene = SyntheticScene::load(opts.scene_path);
    const json traj = load_json_file(opts.trajectory_path, "trajectory");
    if (traj.value("format_version", 0) != 1) {
        throw ConfigError("trajectory: unsupported format_version");
    }
    reject_unknown(traj, {"format_version", "poses", "noise", "seed", "graph", "sensor"},
                   "trajectory");

    GraphParams gp;
    if (traj.contains("graph")) gp = GraphParams::from_json(traj.at("graph"));
    SensorParams sensor;
    if (traj.contains("sensor")) sensor = SensorParams::from_json(traj.at("sensor"));
    NoiseParams noise;
    if (traj.contains("noise")) noise = NoiseParams::from_json(traj.at("noise"));
    DetRng rng(traj.value("seed", 0ull));
    const Vocabulary vocab = load_vocabulary(opts.vocab_path);

    SceneGraph graph(gp);
    std::int64_t frame_id = 0;
    for (const auto& jp : traj.at("poses")) {
        CameraPose pose;
        const auto& pos = jp.at("position");
        pose.position = {pos.at(0).get<double>(), pos.at(1).get<double>(),
                         pos.at(2).get<double>()};
        pose.heading = jp.value("heading", 0.0);
        ++frame_id;
        std::ostringstream ref;
        ref << "f" << std::setw(6) << std::setfill('0') << frame_id;
        const FrameObservation obs = render_frame(scene, pose, sensor, noise, rng, frame_id,
                                                  ref.str(), gp.embedding_dim);
        graph.update(obs, vocab, scene.rooms);
    }

    write_text_file(opts.out_path, dump_pretty(graph.to_json()));

    std::map<std::size_t, int> image_histogram;
    for (const auto& [pair, images] : graph.edge_store().edges()) {
        image_histogram[images.size()] += 1;
    }
    out << "objects: " << graph.object_count() << "\nedges: " << graph.edge_count()
        << "\nsnapshot_hash: " << graph.snapshot_hash() << "\nedge image histogram:\n";
    for (const auto& [n_images, n_edges] : image_histogram) {
        out << "  " << n_images << " image(s): " << n_edges << " edge(s)\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// viewpoint

int cmd_viewpoint(const ViewpointOptions& opts, std::ostream& out) {
    if (opts.scene_path.empty()) throw ConfigError("viewpoint: --scene required");
    if (opts.target_id < 0) throw ConfigError("viewpoint: --target-id required");
    const SyntheticScene scene = SyntheticScene::load(opts.scene_path);
    const GtObject& target = scene.object_by_id(opts.target_id);
    const PointCloud occluders = scene.occluders_excluding(target.cloud);

    std::vector<ViewpointCandidate> scored;
    const ViewpointCandidate best =
        decide_viewpoint_full(target.cloud, occluders, scene.grid, opts.vvd, &scored);

    const ViewpointGtParams gt{opts.viewpoint_radius, opts.vvd.camera_height, opts.los_tau,
                               opts.vvd.clearance};
    const auto& gt_viewpoints = scene.success_viewpoints(opts.target_id, gt);
    const auto dist_to_gt = [&](const Point3& p) {
        double bestd = std::numeric_limits<double>::infinity();
        for (const auto& vp : gt_viewpoints) bestd = std::min(bestd, p.ground_distance_to(vp));
        return bestd;
    };

    json all = json::array();
    for (const auto& c : sample_candidates(target.cloud.centroid(), opts.vvd)) {
        json jc = c.to_json();
        jc.erase("score");
        bool traversable = false;
        for (const auto& s : scored) {
            if (s.ring_index == c.ring_index && s.angle_index == c.angle_index) {
                jc["score"] = s.score;
                jc["dist_to_gt_viewpoint_m"] = dist_to_gt(s.position);
                traversable = true;
                break;
            }
        }
        jc["traversable"] = traversable;
        all.push_back(std::move(jc));
    }
    const json doc{{"format_version", 1},
                   {"scene", scene.name},
                   {"target_id", opts.target_id},
                   {"category", target.category},
                   {"best", best.to_json()},
                   {"candidates", all}};
    if (!opts.out_path.empty()) write_text_file(opts.out_path, dump_pretty(doc));

    if (!opts.plot_data_path.empty()) {
        std::ostringstream csv;
        csv << "score,dist_to_gt_viewpoint_m\n";
        for (const auto& s : scored) {
            csv << s.score << "," << dist_to_gt(s.position) << "\n";
        }
        write_text_file(opts.plot_data_path, csv.str());
    }

    out << "target " << opts.target_id << " (" << target.category << "), "
        << scored.size() << " traversable candidate(s)\n";
    out << "best: ring " << best.ring_radius << " m, angle index " << best.angle_index
        << ", score " << std::fixed << std::setprecision(3) << best.score << ", position ("
        << best.position.x << ", " << best.position.y << ", " << best.position.z << ")\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const StatsOptions& opts, std::ostream& out) {
    if (opts.transcripts.empty()) throw ConfigError("stats: no transcript files given");

    std::vector<double> images_per_query;
    double key_chars = 0.0, full_chars = 0.0, prompt_chars = 0.0;
    for (const auto& path : opts.transcripts) {
        const json t = load_json_file(path, "transcript");
        if (!t.contains("steps")) throw ConfigError("transcript missing steps: " + path);
        for (const auto& step : t.at("steps")) {
            if (!step.contains("key")) continue;
            const json& key = step.at("key");
            images_per_query.push_back(key.at("images").get<double>());
            key_chars += key.at("key_section_chars").get<double>();
            full_chars += key.at("full_graph_chars").get<double>();
            prompt_chars += key.at("prompt_chars").get<double>();
        }
    }
    if (images_per_query.empty()) throw Error("stats: transcripts contain no reasoner queries");

    std::vector<double> sorted = images_per_query;
    std::sort(sorted.begin(), sorted.end());
    const auto percentile = [&](double p) {
        const auto rank = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(sorted.size())));
        return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
    };
    const double mean =
        std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    const double reduction = full_chars > 0.0 ? 1.0 - key_chars / full_chars : 0.0;

    const json doc{{"format_version", 1},
                   {"queries", sorted.size()},
                   {"images_per_query",
                    json{{"mean", mean},
                         {"p50", percentile(0.5)},
                         {"p90", percentile(0.9)},
                         {"max", sorted.back()}}},
                   {"estimated_tokens",
                    json{{"key_subgraph", key_chars / 4.0}, {"full_graph", full_chars / 4.0}}},
                   {"prompt_chars_total", prompt_chars},
                   {"token_reduction_vs_full_graph", reduction}};
    if (!opts.json_out.empty()) write_text_file(opts.json_out, dump_pretty(doc));

    out << "queries: " << sorted.size() << "\n";
    out << "images/query: mean " << std::fixed << std::setprecision(2) << mean << ", p50 "
        << percentile(0.5) << ", p90 " << percentile(0.9) << ", max " << sorted.back() << "\n";
    out << "estimated prompt token reduction vs full graph: " << std::setprecision(1)
        << reduction * 100.0 << "%\n";
    return kOk;
}

}  // namespace msgnav::cli
