#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "msgnav/errors.hpp"
#include "msgnav/rng.hpp"
#include "msgnav/sim.hpp"

using namespace msgnav;
using nlohmann::json;

namespace {

json box_cloud(double x0, double y0, double z0, double x1, double y1, double z1,
               double spacing = 0.08) {
    return json{{"type", "box"}, {"min", {x0, y0, z0}}, {"max", {x1, y1, z1}},
                {"spacing", spacing}};
}

SyntheticScene one_object_scene() {
    json j{{"format_version", 1},
           {"name", "one_object"},
           {"grid", {{"origin", {0.0, 0.0}}, {"cell_size", 0.25}, {"cols", 32}, {"rows", 32}}},
           {"rooms", json::array({{{"name", "studio"}, {"rect", {0.0, 0.0, 8.0, 8.0}}}})},
           {"walls", json::array({box_cloud(3.9, 0.0, 2.0, 4.0, 2.2, 6.0, 0.1)})},
           {"objects", json::array({{{"id", 1},
                                     {"category", "plant"},
                                     {"cloud", box_cloud(6.0, 0.0, 4.0, 6.4, 0.6, 4.4, 0.05)}}})},
           {"agent_start", {{"position", {1.0, 0.0, 4.0}}, {"heading", 0.0}}}};
    return SyntheticScene::from_json(j);
}

CameraPose eye_at(double x, double z, double heading) {
    return {{x, 1.5, z}, heading};
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("render_frame: agent facing away sees nothing") {
    const SyntheticScene scene = one_object_scene();
    DetRng rng(1);
    // object is at +x from (5, 4.2); face -x
    const auto obs = render_frame(scene, eye_at(5.0, 4.2, std::numbers::pi), SensorParams{},
                                  NoiseParams{}, rng, 1, "f1", 8);
    CHECK(obs.detections.empty());
}

TEST_CASE("render_frame: noise off gives the exact ground-truth cloud") {
    const SyntheticScene scene = one_object_scene();
    DetRng rng(1);
    const auto obs = render_frame(scene, eye_at(5.0, 4.2, 0.0), SensorParams{}, NoiseParams{},
                                  rng, 1, "f1", 8);
    REQUIRE(obs.detections.size() == 1);
    const Detection& det = obs.detections[0];
    CHECK(det.category == "plant");
    CHECK(det.cloud.points() == scene.object_by_id(1).cloud.points());
    CHECK(det.confidence > 0.5);
    CHECK(det.embedding.size() == 8);
    CHECK(det.mask_ref == "f1#m1");
}

TEST_CASE("render_frame: a wall blocks line of sight") {
    const SyntheticScene scene = one_object_scene();
    DetRng rng(1);
    // the wall at x=4 sits between (2, 4.2) and the object at (6.2, 4.2)
    const auto obs = render_frame(scene, eye_at(2.0, 4.2, 0.0), SensorParams{}, NoiseParams{},
                                  rng, 1, "f1", 8);
    CHECK(obs.detections.empty());
}

TEST_CASE("render_frame: out of range is not detected") {
    const SyntheticScene scene = one_object_scene();
    DetRng rng(1);
    SensorParams sensor;
    sensor.max_range = 1.0;
    const auto obs =
        render_frame(scene, eye_at(5.0, 4.2, 0.0), sensor, NoiseParams{}, rng, 1, "f1", 8);
    CHECK(obs.detections.empty());
}

TEST_CASE("render_frame: p_miss holds up over a Monte Carlo run") {
    const SyntheticScene scene = one_object_scene();
    NoiseParams noise;
    noise.p_miss = 0.5;
    DetRng rng(2024);
    int detected = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto obs = render_frame(scene, eye_at(5.0, 4.2, 0.0), SensorParams{}, noise, rng,
                                      i + 1, "f", 8);
        detected += static_cast<int>(obs.detections.size());
    }
    CHECK(detected >= 450);
    CHECK(detected <= 550);
}

TEST_CASE("render_frame: flipped labels keep the true visual embedding") {
    json j{{"format_version", 1},
           {"name", "two"},
           {"grid", {{"origin", {0.0, 0.0}}, {"cell_size", 0.25}, {"cols", 32}, {"rows", 32}}},
           {"objects",
            json::array({{{"id", 1}, {"category", "plant"},
                          {"cloud", box_cloud(5.0, 0.0, 3.6, 5.3, 0.5, 3.9, 0.05)}},
                         {{"id", 2}, {"category", "chair"},
                          {"cloud", box_cloud(5.0, 0.0, 4.4, 5.3, 0.5, 4.7, 0.05)}}})},
           {"agent_start", {{"position", {1.0, 0.0, 4.0}}, {"heading", 0.0}}}};
    const SyntheticScene scene = SyntheticScene::from_json(j);
    NoiseParams noise;
    noise.p_flip = 1.0;  // always mislabel
    DetRng rng(7);
    const auto obs = render_frame(scene, eye_at(3.0, 4.1, 0.0), SensorParams{}, noise, rng, 1,
                                  "f1", 8);
    REQUIRE(obs.detections.size() == 2);
    // labels flipped to the other scene category, embeddings unchanged
    CHECK(obs.detections[0].category == "chair");
    CHECK(obs.detections[0].embedding == instance_embedding("plant", 1, 8));
    CHECK(obs.detections[1].category == "plant");
    CHECK(obs.detections[1].embedding == instance_embedding("chair", 2, 8));
}

TEST_CASE("reveal_visible marks cells up to walls and range") {
    const SyntheticScene scene = one_object_scene();
    OccupancyGrid known(scene.grid.origin(), scene.grid.cell_size(), scene.grid.cols(),
                        scene.grid.rows(), CellState::Unknown);
    reveal_visible(scene, known, {2.0, 0.0, 4.0}, 5.0);
    CHECK(known.at(known.index_of({2.0, 0, 4.0})) == CellState::Free);
    CHECK(known.at(known.index_of({3.0, 0, 4.0})) == CellState::Free);
    // the wall cell itself becomes visible, cells beyond it stay unknown
    CHECK(known.at(known.index_of({3.95, 0, 4.0})) == CellState::Occupied);
    CHECK(known.at(known.index_of({5.0, 0, 4.0})) == CellState::Unknown);
    // out of range stays unknown (about 7 m away)
    CHECK(known.at(known.index_of({7.9, 0, 0.3})) == CellState::Unknown);
}

TEST_CASE("extract_frontiers: fully explored map has none") {
    OccupancyGrid known({0, 0, 0}, 0.25, 10, 10, CellState::Free);
    CHECK(extract_frontiers(known, 2).empty());
    OccupancyGrid unknown({0, 0, 0}, 0.25, 10, 10, CellState::Unknown);
    CHECK(extract_frontiers(unknown, 2).empty());  // no free cells at all
}

TEST_CASE("extract_frontiers: half-explored corridor yields exactly one frontier") {
    OccupancyGrid known({0, 0, 0}, 0.25, 10, 3, CellState::Unknown);
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col <= 4; ++col) known.set({col, row}, CellState::Free);
    }
    const auto frontiers = extract_frontiers(known, 2);
    REQUIRE(frontiers.size() == 1);
    CHECK(frontiers[0].cluster_size == 3);
    CHECK(frontiers[0].cell.col == 4);
    CHECK(frontiers[0].id == 0);
}

TEST_CASE("extract_frontiers: two unexplored rooms off a hall give two frontiers") {
    OccupancyGrid known({0, 0, 0}, 0.25, 10, 3, CellState::Occupied);
    for (int col = 0; col < 10; ++col) known.set({col, 2}, CellState::Free);  // hall
    for (int col : {1, 2}) known.set({col, 1}, CellState::Unknown);           // room A door
    for (int col : {7, 8}) known.set({col, 1}, CellState::Unknown);           // room B door
    const auto frontiers = extract_frontiers(known, 2);
    REQUIRE(frontiers.size() == 2);
    CHECK(frontiers[0].cluster_size >= 2);
    CHECK(frontiers[1].cluster_size >= 2);
    CHECK(frontiers[0].cell.col < frontiers[1].cell.col);
}

TEST_CASE("extract_frontiers: min_cluster suppresses small clusters") {
    OccupancyGrid known({0, 0, 0}, 0.25, 10, 3, CellState::Free);
    known.set({5, 1}, CellState::Unknown);  // a single unknown cell
    CHECK(extract_frontiers(known, 2).size() == 1);  // ring around it clusters
    OccupancyGrid known2({0, 0, 0}, 0.25, 3, 1, CellState::Free);
    known2.set({2, 0}, CellState::Unknown);
    // only one frontier cell -> below min_cluster 2
    CHECK(extract_frontiers(known2, 2).empty());
    CHECK(extract_frontiers(known2, 1).size() == 1);
}

TEST_CASE("shortest_path: identical endpoints cost zero") {
    OccupancyGrid grid({0, 0, 0}, 0.25, 10, 10, CellState::Free);
    CHECK(shortest_path(grid, {1.1, 0, 1.1}, {1.1, 0, 1.1}) == 0.0);
}

TEST_CASE("shortest_path: a straight ten-cell corridor costs nine moves") {
    OccupancyGrid grid({0, 0, 0}, 0.25, 10, 1, CellState::Free);
    const double len = shortest_path(grid, grid.center_of({0, 0}), grid.center_of({9, 0}));
    CHECK(len == doctest::Approx(9 * 0.25));
}

TEST_CASE("shortest_path: endpoints must be traversable, paths must exist") {
    OccupancyGrid grid({0, 0, 0}, 0.25, 10, 10, CellState::Free);
    grid.set({5, 5}, CellState::Occupied);
    CHECK_THROWS_AS(shortest_path(grid, grid.center_of({5, 5}), grid.center_of({0, 0})),
                    std::invalid_argument);
    // wall the grid into two disconnected halves
    for (int row = 0; row < 10; ++row) grid.set({4, row}, CellState::Occupied);
    CHECK_THROWS_WITH_AS(shortest_path(grid, grid.center_of({0, 0}), grid.center_of({9, 9})),
                         "disconnected", Error);
}

TEST_CASE("plan_path matches an independent Dijkstra oracle around obstacles") {
    DetRng rng(55);
    for (int trial = 0; trial < 25; ++trial) {
        OccupancyGrid grid({0, 0, 0}, 0.25, 12, 12, CellState::Free);
        for (int i = 0; i < 25; ++i) {
            grid.set({static_cast<int>(rng.uniform_int(0, 11)),
                      static_cast<int>(rng.uniform_int(0, 11))},
                     CellState::Occupied);
        }
        const GridIndex from{0, 0};
        const GridIndex to{11, 11};
        if (grid.at(from) != CellState::Free || grid.at(to) != CellState::Free) continue;

        // oracle: plain O(V^2) Dijkstra with the same move model
        const int n = 12 * 12;
        std::vector<double> dist(n, std::numeric_limits<double>::infinity());
        std::vector<bool> done(n, false);
        const auto free_cell = [&](int col, int row) {
            return col >= 0 && col < 12 && row >= 0 && row < 12 &&
                   grid.at({col, row}) == CellState::Free;
        };
        dist[0] = 0.0;
        for (int it = 0; it < n; ++it) {
            int u = -1;
            for (int i = 0; i < n; ++i) {
                if (!done[i] && (u < 0 || dist[i] < dist[u])) u = i;
            }
            if (u < 0 || !std::isfinite(dist[u])) break;
            done[u] = true;
            const int col = u % 12, row = u / 12;
            for (int dc = -1; dc <= 1; ++dc) {
                for (int dr = -1; dr <= 1; ++dr) {
                    if (dc == 0 && dr == 0) continue;
                    if (!free_cell(col + dc, row + dr)) continue;
                    if (dc != 0 && dr != 0 &&
                        (!free_cell(col + dc, row) || !free_cell(col, row + dr))) {
                        continue;
                    }
                    const double w = (dc != 0 && dr != 0) ? std::numbers::sqrt2 : 1.0;
                    dist[(row + dr) * 12 + col + dc] =
                        std::min(dist[(row + dr) * 12 + col + dc], dist[u] + w);
                }
            }
        }

        const auto path = plan_path(grid, from, to, 0.0);
        if (!std::isfinite(dist[n - 1])) {
            CHECK_FALSE(path.has_value());
        } else {
            REQUIRE(path.has_value());
            CHECK(path->length_m == doctest::Approx(dist[n - 1] * 0.25));
            // every path cell is free and consecutive cells are adjacent
            for (std::size_t i = 1; i < path->cells.size(); ++i) {
                CHECK(grid.at(path->cells[i]) == CellState::Free);
                CHECK(std::abs(path->cells[i].col - path->cells[i - 1].col) <= 1);
                CHECK(std::abs(path->cells[i].row - path->cells[i - 1].row) <= 1);
            }
        }
    }
}

TEST_CASE("compute_metrics: worked examples") {
    EpisodeResult a;
    a.success = true;
    a.shortest_path_m = 4.0;
    a.agent_path_m = 4.0;
    EpisodeResult b = a;

    SUBCASE("all successes on the shortest path give SR=1, SPL=1") {
        const Metrics m = compute_metrics(std::vector<EpisodeResult>{a, b});
        CHECK(m.sr == 1.0);
        CHECK(m.spl == 1.0);
    }
    SUBCASE("one doubled path plus one failure give SR=0.5, SPL=0.25") {
        a.agent_path_m = 8.0;
        b.success = false;
        const Metrics m = compute_metrics(std::vector<EpisodeResult>{a, b});
        CHECK(m.sr == 0.5);
        CHECK(m.spl == 0.25);
    }
}

TEST_CASE("compute_metrics: empty input is rejected") {
    CHECK_THROWS_AS(compute_metrics(std::vector<EpisodeResult>{}), std::invalid_argument);
}

TEST_CASE("compute_metrics equals the formula oracle; SPL <= SR") {
    DetRng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EpisodeResult> results;
        const int n = static_cast<int>(rng.uniform_int(1, 40));
        for (int i = 0; i < n; ++i) {
            EpisodeResult r;
            r.success = rng.bernoulli(0.6);
            r.shortest_path_m = rng.uniform(0.1, 20.0);
            r.agent_path_m = r.shortest_path_m * rng.uniform(1.0, 3.0);
            results.push_back(r);
        }
        double sr = 0, spl = 0;
        for (const auto& r : results) {
            const double s = r.success ? 1.0 : 0.0;
            sr += s;
            spl += s * r.shortest_path_m / std::max(r.shortest_path_m, r.agent_path_m);
        }
        sr /= n;
        spl /= n;
        const Metrics m = compute_metrics(results);
        CHECK(m.sr == doctest::Approx(sr).epsilon(1e-12));
        CHECK(m.spl == doctest::Approx(spl).epsilon(1e-12));
        CHECK(m.spl <= m.sr + 1e-12);
    }
}

TEST_CASE("instance embeddings are unit-norm and stable") {
    const auto e1 = instance_embedding("chair", 3, 16);
    const auto e2 = instance_embedding("chair", 3, 16);
    CHECK(e1 == e2);
    double norm = 0;
    for (double v : e1) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0));
    CHECK(instance_embedding("chair", 4, 16) != e1);
    CHECK(instance_embedding("table", 3, 16) != e1);
}

TEST_CASE("success viewpoints: exhaustive scan finds visible traversable cells") {
    const SyntheticScene scene = one_object_scene();
    const ViewpointGtParams params{1.0, 1.5, 0.08, 0.2};
    const auto& vps = scene.success_viewpoints(1, params);
    REQUIRE(!vps.empty());
    const GtObject& plant = scene.object_by_id(1);
    const PointCloud occluders = scene.occluders_excluding(plant.cloud);
    for (const auto& vp : vps) {
        CHECK(scene.grid.is_traversable(vp, params.clearance));
        double nearest = 1e9;
        for (const auto& p : plant.cloud.points()) {
            nearest = std::min(nearest, vp.ground_distance_to(p));
        }
        CHECK(nearest <= params.radius);
        CHECK(segment_clear({vp.x, params.camera_height, vp.z}, plant.cloud.centroid(),
                            occluders, params.tau, params.tau / 2));
    }
    // cached second call returns the same set
    CHECK(&scene.success_viewpoints(1, params) == &vps);
}

}  // TEST_SUITE
