#include "msgnav/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "msgnav/errors.hpp"

namespace msgnav {

using nlohmann::json;

namespace {

Point3 point_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

std::int64_t quant_key(const Point3& p, double q) {
    const auto cx = static_cast<std::int64_t>(std::llround(p.x / q));
    const auto cy = static_cast<std::int64_t>(std::llround(p.y / q));
    const auto cz = static_cast<std::int64_t>(std::llround(p.z / q));
    constexpr std::int64_t off = 1ll << 20;
    return ((cx + off) << 42) | ((cy + off) << 21) | (cz + off);
}

std::int64_t floor_key(const Point3& p, double cell) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z / cell));
    constexpr std::int64_t off = 1ll << 20;
    return ((cx + off) << 42) | ((cy + off) << 21) | (cz + off);
}

PointCloud cloud_from_json(const json& j) {
    std::vector<Point3> pts;
    const std::string type = j.value("type", "points");
    if (type == "points") {
        for (const auto& p : j.at("points")) pts.push_back(point_from_json(p));
    } else if (type == "box") {
        pts = sample_box_surface(point_from_json(j.at("min")), point_from_json(j.at("max")),
                                 j.value("spacing", 0.05));
    } else {
        throw ConfigError("scene cloud: unknown type '" + type + "'");
    }
    if (pts.empty()) throw ConfigError("scene cloud: no points");
    return PointCloud(std::move(pts));
}

/// Marks every cell whose footprint overlaps the box's ground projection.
void stamp_footprint(OccupancyGrid& grid, const Aabb& box) {
    const double cs = grid.cell_size();
    const GridIndex lo = grid.index_of(box.min);
    const GridIndex hi = grid.index_of(box.max);
    for (int row = lo.row; row <= hi.row; ++row) {
        for (int col = lo.col; col <= hi.col; ++col) {
            const GridIndex idx{col, row};
            if (!grid.in_bounds(idx)) continue;
            const Point3 c = grid.center_of(idx);
            const double x0 = c.x - cs / 2, x1 = c.x + cs / 2;
            const double z0 = c.z - cs / 2, z1 = c.z + cs / 2;
            const double ox = std::min(x1, box.max.x) - std::max(x0, box.min.x);
            const double oz = std::min(z1, box.max.z) - std::max(z0, box.min.z);
            if (ox > 1e-9 && oz > 1e-9) grid.set(idx, CellState::Occupied);
        }
    }
}

}  // namespace

std::string default_data_dir() {
    if (const char* env = std::getenv("MSGNAV_DATA_DIR"); env && *env) return env;
#ifdef MSGNAV_DEFAULT_DATA_DIR
    return MSGNAV_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
}

std::vector<Point3> sample_box_surface(const Point3& min, const Point3& max, double spacing) {
    if (spacing <= 0.0) throw ConfigError("sample_box_surface: spacing must be positive");
    const auto steps = [&](double lo, double hi) {
        const double d = hi - lo;
        return d <= 0.0 ? 1 : static_cast<int>(std::ceil(d / spacing)) + 1;
    };
    const int nx = steps(min.x, max.x);
    const int ny = steps(min.y, max.y);
    const int nz = steps(min.z, max.z);
    const auto coord = [](double lo, double hi, int i, int n) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    };

    std::vector<Point3> pts;
    std::set<std::int64_t> seen;
    const auto push = [&](double x, double y, double z) {
        const Point3 p{x, y, z};
        if (seen.insert(quant_key(p, spacing * 1e-3)).second) pts.push_back(p);
    };
    for (int iy = 0; iy < ny; ++iy) {
        for (int iz = 0; iz < nz; ++iz) {
            const double y = coord(min.y, max.y, iy, ny);
            const double z = coord(min.z, max.z, iz, nz);
            push(min.x, y, z);
            push(max.x, y, z);
        }
    }
    for (int ix = 0; ix < nx; ++ix) {
        for (int iz = 0; iz < nz; ++iz) {
            const double x = coord(min.x, max.x, ix, nx);
            const double z = coord(min.z, max.z, iz, nz);
            push(x, min.y, z);
            push(x, max.y, z);
        }
    }
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const double x = coord(min.x, max.x, ix, nx);
            const double y = coord(min.y, max.y, iy, ny);
            push(x, y, min.z);
            push(x, y, max.z);
        }
    }
    return pts;
}

SyntheticScene SyntheticScene::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scene file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scene parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

SyntheticScene SyntheticScene::from_json(const json& j) {
    if (j.value("format_version", 0) != 1) {
        throw ConfigError("scene file: unsupported format_version");
    }
    SyntheticScene scene;
    scene.name = j.value("name", "unnamed");

    const json& jg = j.at("grid");
    const auto& o = jg.at("origin");
    scene.grid = OccupancyGrid({o.at(0).get<double>(), 0.0, o.at(1).get<double>()},
                               jg.value("cell_size", 0.25), jg.at("cols").get<int>(),
                               jg.at("rows").get<int>(), CellState::Free);

    if (j.contains("rooms")) {
        for (const auto& r : j.at("rooms")) {
            const auto& rect = r.at("rect");
            scene.rooms.rooms.push_back({r.at("name").get<std::string>(),
                                         rect.at(0).get<double>(), rect.at(1).get<double>(),
                                         rect.at(2).get<double>(), rect.at(3).get<double>()});
        }
    }

    std::vector<Point3> wall_pts;
    if (j.contains("walls")) {
        for (const auto& w : j.at("walls")) {
            PointCloud cloud = cloud_from_json(w);
            wall_pts.insert(wall_pts.end(), cloud.points().begin(), cloud.points().end());
            stamp_footprint(scene.grid, Aabb::of_points(cloud.points()));
        }
    }
    scene.walls = PointCloud(std::move(wall_pts));

    std::set<int> ids;
    if (j.contains("objects")) {
        for (const auto& jo : j.at("objects")) {
            GtObject obj;
            obj.id = jo.at("id").get<int>();
            if (!ids.insert(obj.id).second) throw ConfigError("scene: duplicate object id");
            obj.category = jo.at("category").get<std::string>();
            obj.cloud = cloud_from_json(jo.at("cloud"));
            obj.bbox = Aabb::of_points(obj.cloud.points());
            obj.room = jo.contains("room") ? jo.at("room").get<std::string>()
                                           : scene.rooms.room_at(obj.cloud.centroid());
            obj.blocks = jo.value("blocks", true);
            if (obj.blocks) stamp_footprint(scene.grid, obj.bbox);
            scene.objects.push_back(std::move(obj));
        }
    }
    std::sort(scene.objects.begin(), scene.objects.end(),
              [](const GtObject& a, const GtObject& b) { return a.id < b.id; });

    // Episodes may run in parallel over a shared scene; the wall index is
    // the only lazily built structure queries touch, so build it now.
    scene.walls.build_index();

    const json& ja = j.at("agent_start");
    scene.agent_start.position = point_from_json(ja.at("position"));
    scene.agent_start.heading = ja.value("heading", 0.0);

    if (j.contains("goals")) {
        for (const auto& jg2 : j.at("goals")) {
            SceneGoal goal;
            goal.target_id = jg2.at("target_id").get<int>();
            const std::string kind = jg2.at("kind").get<std::string>();
            if (kind == "category") {
                goal.goal = Goal::category(jg2.at("category").get<std::string>());
            } else if (kind == "language") {
                goal.goal = Goal::language(jg2.at("description").get<std::string>());
            } else if (kind == "image") {
                goal.goal = Goal::image(jg2.at("image").get<std::string>(),
                                        jg2.value("description", ""));
            } else {
                throw ConfigError("scene goal: unknown kind '" + kind + "'");
            }
            goal.name = jg2.value("name", to_string(goal.goal.kind) + ":" +
                                              std::to_string(goal.target_id));
            if (!ids.count(goal.target_id)) throw ConfigError("scene goal: unknown target_id");
            scene.goals.push_back(std::move(goal));
        }
    }
    return scene;
}

const GtObject& SyntheticScene::object_by_id(int id) const {
    for (const auto& o : objects) {
        if (o.id == id) return o;
    }
    throw ConfigError("scene: unknown object id " + std::to_string(id));
}

const SceneGoal& SyntheticScene::goal_by_name(const std::string& goal_name) const {
    for (const auto& g : goals) {
        if (g.name == goal_name) return g;
    }
    throw ConfigError("scene: unknown goal '" + goal_name + "'");
}

const PointCloud& SyntheticScene::world_cloud() const {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    if (!world_cloud_built_) {
        std::vector<Point3> pts = walls.points();
        for (const auto& obj : objects) {
            pts.insert(pts.end(), obj.cloud.points().begin(), obj.cloud.points().end());
        }
        world_cloud_ = PointCloud(std::move(pts));
        world_cloud_built_ = true;
    }
    return world_cloud_;
}

PointCloud SyntheticScene::occluders_excluding(const PointCloud& target) const {
    constexpr double kExclusionVoxel = 0.05;
    std::set<std::int64_t> target_keys;
    for (const auto& p : target.points()) target_keys.insert(floor_key(p, kExclusionVoxel));
    std::vector<Point3> pts;
    const PointCloud& world = world_cloud();
    pts.reserve(world.size());
    for (const auto& p : world.points()) {
        if (!target_keys.count(floor_key(p, kExclusionVoxel))) pts.push_back(p);
    }
    return PointCloud(std::move(pts));
}

const std::vector<Point3>& SyntheticScene::success_viewpoints(
    int object_id, const ViewpointGtParams& params) const {
    std::ostringstream key;
    key << object_id << "|" << params.radius << "|" << params.camera_height << "|" << params.tau
        << "|" << params.clearance;
    {
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        auto it = viewpoint_cache_.find(key.str());
        if (it != viewpoint_cache_.end()) return it->second;
    }

    const GtObject& obj = object_by_id(object_id);
    const Point3 center = obj.cloud.centroid();
    const PointCloud occluders = occluders_excluding(obj.cloud);

    std::vector<Point3> viewpoints;
    for (int row = 0; row < grid.rows(); ++row) {
        for (int col = 0; col < grid.cols(); ++col) {
            const Point3 c = grid.center_of({col, row});
            if (!grid.is_traversable(c, params.clearance)) continue;
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& p : obj.cloud.points()) {
                nearest = std::min(nearest, c.ground_distance_to(p));
                if (nearest <= params.radius) break;
            }
            if (nearest > params.radius) continue;
            const Point3 eye{c.x, params.camera_height, c.z};
            if (!segment_clear(eye, center, occluders, params.tau, params.tau / 2.0)) continue;
            viewpoints.push_back(c);
        }
    }

    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto [it, inserted] = viewpoint_cache_.emplace(key.str(), std::move(viewpoints));
    return it->second;
}

}  // namespace msgnav
