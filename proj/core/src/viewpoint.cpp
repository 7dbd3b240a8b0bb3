#include "msgnav/viewpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "msgnav/errors.hpp"
#include "msgnav/rng.hpp"

namespace msgnav {

using nlohmann::json;

void VvdParams::validate() const {
    if (radii.empty()) throw std::invalid_argument("VvdParams: radii must be non-empty");
    if (!std::is_sorted(radii.begin(), radii.end())) {
        throw std::invalid_argument("VvdParams: radii must be sorted ascending");
    }
    for (double r : radii) {
        if (r <= 0.0) throw std::invalid_argument("VvdParams: radii must be positive");
    }
    if (samples_per_ring < 3) throw std::invalid_argument("VvdParams: K must be >= 3");
    if (camera_height <= 0.0) throw std::invalid_argument("VvdParams: camera height must be positive");
    if (obstruction_distance <= 0.0) throw std::invalid_argument("VvdParams: tau must be positive");
    if (clearance < 0.0) throw std::invalid_argument("VvdParams: clearance must be non-negative");
    if (step < 0.0) throw std::invalid_argument("VvdParams: step must be non-negative");
    if (max_target_points < 1) throw std::invalid_argument("VvdParams: max_target_points must be >= 1");
}

json VvdParams::to_json() const {
    return json{{"radii", radii},
                {"samples_per_ring", samples_per_ring},
                {"camera_height", camera_height},
                {"obstruction_distance", obstruction_distance},
                {"clearance", clearance},
                {"step", step},
                {"max_target_points", max_target_points},
                {"subsample_seed", subsample_seed}};
}

VvdParams VvdParams::from_json(const json& j) {
    VvdParams p;
    if (j.contains("radii")) p.radii = j.at("radii").get<std::vector<double>>();
    p.samples_per_ring = j.value("samples_per_ring", p.samples_per_ring);
    p.camera_height = j.value("camera_height", p.camera_height);
    p.obstruction_distance = j.value("obstruction_distance", p.obstruction_distance);
    p.clearance = j.value("clearance", p.clearance);
    p.step = j.value("step", p.step);
    p.max_target_points = j.value("max_target_points", p.max_target_points);
    p.subsample_seed = j.value("subsample_seed", p.subsample_seed);
    p.validate();
    return p;
}

json ViewpointCandidate::to_json() const {
    return json{{"position", json::array({position.x, position.y, position.z})},
                {"score", score},
                {"ring_radius", ring_radius},
                {"ring_index", ring_index},
                {"angle_index", angle_index}};
}

std::vector<ViewpointCandidate> sample_candidates(const Point3& center,
                                                  const VvdParams& params) {
    params.validate();
    std::vector<ViewpointCandidate> out;
    out.reserve(params.radii.size() * static_cast<std::size_t>(params.samples_per_ring));
    for (std::size_t ri = 0; ri < params.radii.size(); ++ri) {
        const double r = params.radii[ri];
        for (int k = 0; k < params.samples_per_ring; ++k) {
            const double theta =
                2.0 * std::numbers::pi * static_cast<double>(k) / params.samples_per_ring;
            ViewpointCandidate c;
            c.position = {center.x + r * std::cos(theta), params.camera_height,
                          center.z + r * std::sin(theta)};
            c.ring_radius = r;
            c.ring_index = static_cast<int>(ri);
            c.angle_index = k;
            out.push_back(c);
        }
    }
    return out;
}

double visibility_score(const Point3& v, const PointCloud& target_cloud,
                        const PointCloud& occluders, double tau, double step) {
    if (target_cloud.empty()) throw std::invalid_argument("empty target cloud");
    std::size_t visible = 0;
    for (const auto& p : target_cloud.points()) {
        if (segment_clear(v, p, occluders, tau, step)) ++visible;
    }
    return static_cast<double>(visible) / static_cast<double>(target_cloud.size());
}

PointCloud subsample_cloud(const PointCloud& cloud, int max_points, std::uint64_t seed) {
    if (max_points < 1) throw std::invalid_argument("subsample_cloud: max_points must be >= 1");
    if (cloud.size() <= static_cast<std::size_t>(max_points)) return cloud;

    std::vector<std::size_t> indices(cloud.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    DetRng rng(seed);
    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>(max_points));
    for (int k = 0; k < max_points; ++k) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(k, static_cast<std::int64_t>(indices.size()) - 1));
        std::swap(indices[static_cast<std::size_t>(k)], indices[j]);
        pts.push_back(cloud.points()[indices[static_cast<std::size_t>(k)]]);
    }
    return PointCloud(std::move(pts));
}

ViewpointCandidate decide_viewpoint(const PointCloud& target_cloud, const PointCloud& occluders,
                                    const OccupancyGrid& grid, const VvdParams& params) {
    return decide_viewpoint_full(target_cloud, occluders, grid, params, nullptr);
}

ViewpointCandidate decide_viewpoint_full(const PointCloud& target_cloud,
                                         const PointCloud& occluders, const OccupancyGrid& grid,
                                         const VvdParams& params,
                                         std::vector<ViewpointCandidate>* all_scored) {
    params.validate();
    if (target_cloud.empty()) throw std::invalid_argument("empty target cloud");

    const Point3 center = target_cloud.centroid();
    std::vector<ViewpointCandidate> candidates = sample_candidates(center, params);
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [&](const ViewpointCandidate& c) {
                                        return !grid.is_traversable(c.position, params.clearance);
                                    }),
                     candidates.end());
    if (candidates.empty()) {
        throw NoViewpointError("no traversable candidate viewpoint on any ring");
    }

    const PointCloud scored_target =
        subsample_cloud(target_cloud, params.max_target_points, params.subsample_seed);
    const double tau = params.obstruction_distance;
    const double step = params.effective_step();
    for (auto& c : candidates) {
        c.score = visibility_score(c.position, scored_target, occluders, tau, step);
    }
    if (all_scored) *all_scored = candidates;

    // argmax; candidates are already in (ring, angle) order so strict '>'
    // keeps the smaller ring/angle on ties.
    const ViewpointCandidate* best = &candidates.front();
    for (const auto& c : candidates) {
        if (c.score > best->score) best = &c;
    }
    return *best;
}

}  // namespace msgnav
