#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "msgnav/episode.hpp"
#include "msgnav/reasoning.hpp"

namespace msgnav::cli {

inline constexpr int kOk = 0;
inline constexpr int kConfigExit = 2;
inline constexpr int kRuntimeExit = 3;
inline constexpr int kProtocolExit = 4;

struct RunOptions {
    std::vector<std::string> scenes;
    std::vector<std::string> goal_filter;  // empty: all goals
    std::string reasoner = "oracle";       // oracle | mock:<path> | http(s)://...
    bool vvd = true;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string vocab_path;  // empty: bundled seed list
    bool lifelong = false;
    int jobs = 1;
    EpisodeParams params;
};

/// Applies a config file on top of flag-derived options (config file values
/// win). Rejects unknown keys anywhere in the document.
void apply_config_file(RunOptions& opts, const std::string& path);

std::unique_ptr<Reasoner> make_reasoner(const std::string& spec);
Vocabulary load_vocabulary(const std::string& vocab_path);

int cmd_run(const RunOptions& opts, std::ostream& out);

struct GraphOptions {
    std::string scene_path;
    std::string trajectory_path;
    std::string out_path;
    std::string vocab_path;
};
int cmd_graph(const GraphOptions& opts, std::ostream& out);

struct ViewpointOptions {
    std::string scene_path;
    int target_id = -1;
    VvdParams vvd;
    double viewpoint_radius = 2.0;
    double los_tau = 0.08;
    std::string out_path;
    std::string plot_data_path;
};
int cmd_viewpoint(const ViewpointOptions& opts, std::ostream& out);

struct StatsOptions {
    std::vector<std::string> transcripts;
    std::string json_out;
};
int cmd_stats(const StatsOptions& opts, std::ostream& out);

}  // namespace msgnav::cli
