#include <doctest.h>

#include <cmath>

#include "msgnav/errors.hpp"
#include "msgnav/rng.hpp"
#include "msgnav/scene.hpp"
#include "msgnav/viewpoint.hpp"

using namespace msgnav;
using nlohmann::json;

namespace {

VvdParams small_params() {
    VvdParams p;
    p.radii = {0.8, 1.2};
    p.samples_per_ring = 8;
    return p;
}

json box_cloud(double x0, double y0, double z0, double x1, double y1, double z1,
               double spacing = 0.05) {
    return json{{"type", "box"}, {"min", {x0, y0, z0}}, {"max", {x1, y1, z1}},
                {"spacing", spacing}};
}

/// 10x10 m scene with a tv mounted on the north face of a long divider
/// wall: the Euclidean-nearest traversable cells sit south of the divider
/// with no line of sight, the open approach is from the north.
SyntheticScene divider_scene() {
    json j{{"format_version", 1},
           {"name", "divider"},
           {"grid", {{"origin", {0.0, 0.0}}, {"cell_size", 0.25}, {"cols", 40}, {"rows", 40}}},
           {"rooms", json::array({{{"name", "room"}, {"rect", {0.0, 0.0, 10.0, 10.0}}}})},
           {"walls",
            json::array({
                box_cloud(0.0, 0.0, 0.0, 10.0, 2.2, 0.15, 0.1),   // south
                box_cloud(0.0, 0.0, 9.85, 10.0, 2.2, 10.0, 0.1),  // north
                box_cloud(0.0, 0.0, 0.0, 0.15, 2.2, 10.0, 0.1),   // west
                box_cloud(9.85, 0.0, 0.0, 10.0, 2.2, 10.0, 0.1),  // east
                box_cloud(3.0, 0.0, 4.5, 7.0, 2.2, 4.6, 0.1),     // divider
            })},
           {"objects", json::array({{{"id", 1},
                                     {"category", "tv"},
                                     {"cloud", box_cloud(4.7, 0.4, 4.6, 5.3, 1.2, 4.8)}}})},
           {"agent_start", {{"position", {1.0, 0.0, 1.0}}, {"heading", 0.0}}}};
    return SyntheticScene::from_json(j);
}

}  // namespace

TEST_SUITE("viewpoint") {

TEST_CASE("sample_candidates at cardinal angles matches the ring formula") {
    VvdParams p;
    p.radii = {1.0};
    p.samples_per_ring = 4;
    p.camera_height = 1.5;
    const auto cands = sample_candidates({0, 0.4, 0}, p);
    REQUIRE(cands.size() == 4);
    CHECK(cands[0].position.distance_to({1, 1.5, 0}) < 1e-12);
    CHECK(cands[1].position.distance_to({0, 1.5, 1}) < 1e-12);
    CHECK(cands[2].position.distance_to({-1, 1.5, 0}) < 1e-12);
    CHECK(cands[3].position.distance_to({0, 1.5, -1}) < 1e-12);
}

TEST_CASE("sample_candidates count is rings times K") {
    VvdParams p;
    p.radii = {1.0, 2.0};
    p.samples_per_ring = 3;
    CHECK(sample_candidates({0, 0, 0}, p).size() == 6);
}

TEST_CASE("sample_candidates satisfies the formula for random parameters") {
    DetRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        VvdParams p;
        p.radii = {rng.uniform(0.3, 1.0), rng.uniform(1.0, 2.5)};
        p.samples_per_ring = static_cast<int>(rng.uniform_int(3, 24));
        p.camera_height = rng.uniform(0.8, 2.0);
        const Point3 c{rng.uniform(-4, 4), rng.uniform(0, 1), rng.uniform(-4, 4)};
        for (const auto& cand : sample_candidates(c, p)) {
            CHECK(cand.position.y == p.camera_height);
            const double r = std::hypot(cand.position.x - c.x, cand.position.z - c.z);
            CHECK(std::fabs(r - cand.ring_radius) < 1e-9);
        }
    }
}

TEST_CASE("parameter validation rejects bad configurations") {
    VvdParams p;
    p.samples_per_ring = 2;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = VvdParams{};
    p.radii = {2.0, 1.0};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = VvdParams{};
    p.obstruction_distance = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("visibility_score: no occluders means full visibility") {
    const PointCloud target({{0, 0.5, 0}, {0.2, 0.5, 0}, {0, 0.7, 0.2}});
    CHECK(visibility_score({2, 1.5, 2}, target, PointCloud{}, 0.1, 0.05) == 1.0);
}

TEST_CASE("visibility_score: empty target cloud throws") {
    CHECK_THROWS_AS(visibility_score({0, 0, 0}, PointCloud{}, PointCloud{}, 0.1, 0.05),
                    std::invalid_argument);
}

TEST_CASE("visibility_score: an opaque wall in between blocks everything") {
    const PointCloud target(sample_box_surface({-0.3, 0.2, 0.0}, {0.3, 0.8, 0.3}, 0.05));
    const PointCloud wall(sample_box_surface({-2.0, 0.0, -1.05}, {2.0, 3.0, -1.0}, 0.05));
    const Point3 v{0, 1.5, -3};
    const double coarse = visibility_score(v, target, wall, 0.1, 0.05);
    CHECK(coarse == 0.0);
    // dense oracle agrees
    CHECK(visibility_score(v, target, wall, 0.1, 0.005) == 0.0);
}

TEST_CASE("visibility_score: a half-plane hides exactly half of a two-point target") {
    const PointCloud target({{-0.5, 1.0, 0.0}, {0.5, 1.0, 0.0}});
    // occluder covering only rays toward the +x point
    const PointCloud wall(sample_box_surface({0.1, 0.0, -1.02}, {2.0, 3.0, -1.0}, 0.04));
    CHECK(visibility_score({0, 1.5, -2}, target, wall, 0.08, 0.04) == 0.5);
}

TEST_CASE("score is monotone under occluder removal") {
    DetRng rng(9);
    for (int trial = 0; trial < 15; ++trial) {
        std::vector<Point3> occ;
        for (int i = 0; i < 120; ++i) {
            occ.push_back({rng.uniform(-2, 2), rng.uniform(0, 2), rng.uniform(-2, 2)});
        }
        std::vector<Point3> kept;
        for (const auto& p : occ) {
            if (rng.bernoulli(0.6)) kept.push_back(p);
        }
        std::vector<Point3> tgt;
        for (int i = 0; i < 25; ++i) {
            tgt.push_back({rng.uniform(-0.4, 0.4), rng.uniform(0.2, 1.0),
                           rng.uniform(-0.4, 0.4)});
        }
        const PointCloud target(tgt);
        const Point3 v{rng.uniform(-3, 3), 1.5, rng.uniform(-3, 3)};
        const double full = visibility_score(v, target, PointCloud(occ), 0.1, 0.05);
        const double fewer = visibility_score(v, target, PointCloud(kept), 0.1, 0.05);
        CHECK(fewer >= full);
    }
}

TEST_CASE("subsample_cloud is deterministic per seed and size-capped") {
    DetRng rng(10);
    std::vector<Point3> pts;
    for (int i = 0; i < 500; ++i) {
        pts.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    }
    const PointCloud cloud(pts);
    const PointCloud a = subsample_cloud(cloud, 100, 7);
    const PointCloud b = subsample_cloud(cloud, 100, 7);
    REQUIRE(a.size() == 100);
    CHECK(a.points() == b.points());
    CHECK(subsample_cloud(cloud, 1000, 7).size() == 500);  // already fits
}

TEST_CASE("decide_viewpoint: uniform scores break ties to ring 0, angle 0") {
    OccupancyGrid grid({-10, 0, -10}, 0.25, 80, 80, CellState::Free);
    const PointCloud target(sample_box_surface({-0.2, 0.2, -0.2}, {0.2, 0.8, 0.2}, 0.05));
    const auto best = decide_viewpoint(target, PointCloud{}, grid, small_params());
    CHECK(best.score == 1.0);
    CHECK(best.ring_index == 0);
    CHECK(best.angle_index == 0);
}

TEST_CASE("decide_viewpoint: no traversable candidate raises the documented error") {
    OccupancyGrid grid({-10, 0, -10}, 0.25, 80, 80, CellState::Occupied);
    const PointCloud target({{0, 0.5, 0}});
    CHECK_THROWS_AS(decide_viewpoint(target, PointCloud{}, grid, small_params()),
                    NoViewpointError);
}

TEST_CASE("decide_viewpoint: divider scene sends the agent to the open side") {
    const SyntheticScene scene = divider_scene();
    const GtObject& tv = scene.object_by_id(1);
    const PointCloud occluders = scene.occluders_excluding(tv.cloud);
    const Point3 center = tv.cloud.centroid();

    VvdParams p;  // default rings 0.8..2.0
    std::vector<ViewpointCandidate> scored;
    const auto best = decide_viewpoint_full(tv.cloud, occluders, scene.grid, p, &scored);

    CHECK(best.score >= 0.9);
    CHECK(best.position.z > center.z);  // north of the divider

    // the Euclidean-nearest traversable cell sits south of the divider and
    // is nearly blind
    double nearest_dist = 1e9;
    Point3 nearest_cell;
    for (int row = 0; row < scene.grid.rows(); ++row) {
        for (int col = 0; col < scene.grid.cols(); ++col) {
            const Point3 c = scene.grid.center_of({col, row});
            if (!scene.grid.is_traversable(c, p.clearance)) continue;
            const double d = c.ground_distance_to(center);
            if (d < nearest_dist) {
                nearest_dist = d;
                nearest_cell = c;
            }
        }
    }
    CHECK(nearest_cell.z < center.z);  // south side
    const double naive_score =
        visibility_score({nearest_cell.x, p.camera_height, nearest_cell.z}, tv.cloud,
                         occluders, p.obstruction_distance, p.effective_step());
    CHECK(naive_score <= 0.3);
}

TEST_CASE("decide_viewpoint: an enclosure with one gap forces the gap candidate") {
    json j{{"format_version", 1},
           {"name", "gap"},
           {"grid", {{"origin", {0.0, 0.0}}, {"cell_size", 0.25}, {"cols", 40}, {"rows", 40}}},
           {"walls",
            json::array({
                box_cloud(3.8, 0.0, 6.0, 6.2, 2.2, 6.1, 0.08),  // north
                box_cloud(3.8, 0.0, 3.9, 6.2, 2.2, 4.0, 0.08),  // south
                box_cloud(3.8, 0.0, 4.0, 3.9, 2.2, 6.0, 0.08),  // west
                box_cloud(6.1, 0.0, 4.0, 6.2, 2.2, 4.6, 0.08),  // east, below gap
                box_cloud(6.1, 0.0, 5.4, 6.2, 2.2, 6.0, 0.08),  // east, above gap
            })},
           {"objects", json::array({{{"id", 1},
                                     {"category", "plant"},
                                     {"cloud", box_cloud(4.8, 0.0, 4.8, 5.2, 0.6, 5.2)}}})},
           {"agent_start", {{"position", {1.0, 0.0, 1.0}}, {"heading", 0.0}}}};
    const SyntheticScene scene = SyntheticScene::from_json(j);
    const GtObject& plant = scene.object_by_id(1);

    VvdParams p;
    p.radii = {1.6};
    p.samples_per_ring = 8;
    const auto best =
        decide_viewpoint(plant.cloud, scene.occluders_excluding(plant.cloud), scene.grid, p);
    CHECK(best.angle_index == 0);  // +x: looking in through the east gap
    CHECK(best.score > 0.5);
}

TEST_CASE("argmax is invariant under uniform scaling by two") {
    const SyntheticScene scene = divider_scene();
    const GtObject& tv = scene.object_by_id(1);
    const PointCloud occluders = scene.occluders_excluding(tv.cloud);

    VvdParams p;
    p.radii = {0.8, 1.2};
    p.samples_per_ring = 12;
    std::vector<ViewpointCandidate> scored;
    const auto best = decide_viewpoint_full(tv.cloud, occluders, scene.grid, p, &scored);

    const auto scale_cloud = [](const PointCloud& c) {
        std::vector<Point3> pts;
        for (const auto& q : c.points()) pts.push_back(q * 2.0);
        return PointCloud(pts);
    };
    OccupancyGrid grid2(scene.grid.origin() * 2.0, scene.grid.cell_size() * 2.0,
                        scene.grid.cols(), scene.grid.rows(), CellState::Unknown);
    for (int row = 0; row < grid2.rows(); ++row) {
        for (int col = 0; col < grid2.cols(); ++col) {
            grid2.set({col, row}, scene.grid.at({col, row}));
        }
    }
    VvdParams p2 = p;
    p2.radii = {1.6, 2.4};
    p2.camera_height *= 2.0;
    p2.obstruction_distance *= 2.0;
    p2.clearance *= 2.0;
    std::vector<ViewpointCandidate> scored2;
    const auto best2 =
        decide_viewpoint_full(scale_cloud(tv.cloud), scale_cloud(occluders), grid2, p2,
                              &scored2);
    CHECK(best2.ring_index == best.ring_index);
    CHECK(best2.angle_index == best.angle_index);
    REQUIRE(scored2.size() == scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        CHECK(scored2[i].score == doctest::Approx(scored[i].score).epsilon(1e-12));
    }
}

TEST_CASE("coarse scores track the dense oracle within 0.05") {
    const SyntheticScene scene = divider_scene();
    const GtObject& tv = scene.object_by_id(1);
    const PointCloud occluders = scene.occluders_excluding(tv.cloud);
    const double tau = 0.1;

    VvdParams p;
    p.radii = {0.8, 1.6};
    p.samples_per_ring = 6;
    for (const auto& cand : sample_candidates(tv.cloud.centroid(), p)) {
        if (!scene.grid.is_traversable(cand.position, p.clearance)) continue;
        const double coarse = visibility_score(cand.position, tv.cloud, occluders, tau, tau / 2);
        const double dense = visibility_score(cand.position, tv.cloud, occluders, tau, tau / 20);
        CHECK(std::fabs(coarse - dense) <= 0.05);
    }
}

}  // TEST_SUITE
