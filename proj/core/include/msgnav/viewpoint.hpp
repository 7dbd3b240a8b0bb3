#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "msgnav/geometry.hpp"

namespace msgnav {

/// Sampling and scoring parameters for visibility-based viewpoint
/// selection. Radii must be sorted ascending; `step` of 0 means tau/2.
struct VvdParams {
    std::vector<double> radii{0.8, 1.2, 1.6, 2.0};
    int samples_per_ring = 16;  // K
    double camera_height = 1.5;
    double obstruction_distance = 0.1;  // tau
    double clearance = 0.2;
    double step = 0.0;
    int max_target_points = 2000;
    std::uint64_t subsample_seed = 0;

    double effective_step() const { return step > 0.0 ? step : obstruction_distance / 2.0; }
    void validate() const;

    nlohmann::json to_json() const;
    static VvdParams from_json(const nlohmann::json& j);
};

struct ViewpointCandidate {
    Point3 position;
    double score = 0.0;   // visibility ratio in [0, 1]
    double ring_radius = 0.0;
    int ring_index = 0;
    int angle_index = 0;

    nlohmann::json to_json() const;
};

/// Ring samples around the target center: for ring radius r and angle
/// theta_k = 2*pi*k/K, the candidate sits at
/// (c.x + r*cos(theta), camera_height, c.z + r*sin(theta)).
/// Ordered by ring then angle index; no traversability filtering here.
std::vector<ViewpointCandidate> sample_candidates(const Point3& center, const VvdParams& params);

/// Fraction of target points with an unobstructed tau-clearance segment
/// from v. `occluders` must already exclude the target's own points.
double visibility_score(const Point3& v, const PointCloud& target_cloud,
                        const PointCloud& occluders, double tau, double step);

/// Uniform subsample without replacement (partial Fisher-Yates, seeded);
/// returns the input when it already fits.
PointCloud subsample_cloud(const PointCloud& cloud, int max_points, std::uint64_t seed);

/// Full viewpoint decision: sample rings, keep traversable candidates,
/// score each against the (target-free) occluder cloud, return the argmax.
/// Ties break toward the smaller ring, then the smaller angle index.
/// Throws NoViewpointError when no candidate is traversable.
ViewpointCandidate decide_viewpoint(const PointCloud& target_cloud, const PointCloud& occluders,
                                    const OccupancyGrid& grid, const VvdParams& params);

/// decide_viewpoint, but also reporting every traversable scored candidate
/// (for inspection tooling and score/distance exports).
ViewpointCandidate decide_viewpoint_full(const PointCloud& target_cloud,
                                         const PointCloud& occluders, const OccupancyGrid& grid,
                                         const VvdParams& params,
                                         std::vector<ViewpointCandidate>* all_scored);

}  // namespace msgnav
