#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "msgnav/rng.hpp"
#include "msgnav/scene.hpp"

namespace msgnav {

struct SensorParams {
    double fov_deg = 90.0;
    double max_range = 5.0;
    double los_tau = 0.08;  // wall-occlusion clearance for detection rays

    nlohmann::json to_json() const;
    static SensorParams from_json(const nlohmann::json& j);
};

struct NoiseParams {
    double p_miss = 0.0;
    double sigma_pos = 0.0;
    double p_flip = 0.0;
    double sigma_emb = 0.0;

    bool any() const { return p_miss > 0 || sigma_pos > 0 || p_flip > 0 || sigma_emb > 0; }
    nlohmann::json to_json() const;
    static NoiseParams from_json(const nlohmann::json& j);
};

/// Stable per-(category, instance) unit embedding; additive noise is drawn
/// by the caller's rng on top.
std::vector<double> instance_embedding(const std::string& category, int instance, int dim);

/// Ground-truth detector stand-in: objects in the field of view, within
/// range, with wall-clear line of sight. Noise may drop, displace or
/// mislabel detections. The camera pose is the eye (y at camera height).
FrameObservation render_frame(const SyntheticScene& scene, const CameraPose& eye,
                              const SensorParams& sensor, const NoiseParams& noise, DetRng& rng,
                              std::int64_t frame_id, const std::string& image_ref,
                              int embedding_dim);

/// Radial ray sweep from `from` (ground position): copies ground-truth
/// cell states into `known` for every cell a ray reaches, stopping rays at
/// the first occupied cell.
void reveal_visible(const SyntheticScene& scene, OccupancyGrid& known, const Point3& from,
                    double max_range);

struct Frontier {
    int id = 0;
    GridIndex cell;
    Point3 position;  // representative cell center, ground height
    int cluster_size = 0;
    std::string room;
    std::map<std::string, int> categories;
};

/// Free cells bordering unknown space, clustered 8-connected; clusters of
/// at least min_cluster cells become frontiers ordered by size (largest
/// first), represented by the member cell nearest the cluster centroid.
std::vector<Frontier> extract_frontiers(const OccupancyGrid& known, int min_cluster);

/// Fills each frontier's room label and nearby ground-truth category
/// histogram (the stand-in for frontier images).
void annotate_frontiers(std::vector<Frontier>& frontiers, const SyntheticScene& scene,
                        double peek_radius);

std::vector<FrontierView> frontier_views(const std::vector<Frontier>& frontiers);

struct PathResult {
    std::vector<GridIndex> cells;  // including start and goal
    double length_m = 0.0;
};

/// A* over traversable cells, 8-connected with sqrt(2)-cost diagonals and
/// no corner cutting. nullopt when disconnected.
std::optional<PathResult> plan_path(const OccupancyGrid& grid, const GridIndex& from,
                                    const GridIndex& to, double clearance);

/// Shortest grid path length between two traversable positions, meters.
/// Throws on non-traversable endpoints or a disconnected pair.
double shortest_path(const OccupancyGrid& grid, const Point3& a, const Point3& b,
                     double clearance = 0.0);

/// Grid distances from a start cell to every reachable traversable cell
/// (same move model as plan_path); unreachable cells hold infinity.
std::vector<double> distance_field(const OccupancyGrid& grid, const GridIndex& from,
                                   double clearance);

struct EpisodeResult {
    std::string scene;
    std::string goal_name;
    GoalKind kind = GoalKind::Category;
    bool success = false;
    double shortest_path_m = 0.0;  // l_s, start to the success region
    double agent_path_m = 0.0;     // l_a
    int steps_used = 0;
    Point3 stop_position;
    double dist_to_nearest_viewpoint = 0.0;
    std::string failure_reason;

    double spl_term() const;
    nlohmann::json to_json() const;
    static EpisodeResult from_json(const nlohmann::json& j);
};

struct Metrics {
    double sr = 0.0;
    double spl = 0.0;
    int count = 0;
};

/// SR = mean success; SPL = mean S_i * l_s / max(l_s, l_a).
Metrics compute_metrics(std::span<const EpisodeResult> results);

}  // namespace msgnav
