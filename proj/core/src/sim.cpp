#include "msgnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <set>

#include "msgnav/errors.hpp"

namespace msgnav {

using nlohmann::json;

json SensorParams::to_json() const {
    return json{{"fov_deg", fov_deg}, {"max_range", max_range}, {"los_tau", los_tau}};
}

SensorParams SensorParams::from_json(const json& j) {
    SensorParams p;
    p.fov_deg = j.value("fov_deg", p.fov_deg);
    p.max_range = j.value("max_range", p.max_range);
    p.los_tau = j.value("los_tau", p.los_tau);
    return p;
}

json NoiseParams::to_json() const {
    return json{{"p_miss", p_miss},
                {"sigma_pos", sigma_pos},
                {"p_flip", p_flip},
                {"sigma_emb", sigma_emb}};
}

NoiseParams NoiseParams::from_json(const json& j) {
    NoiseParams p;
    p.p_miss = j.value("p_miss", p.p_miss);
    p.sigma_pos = j.value("sigma_pos", p.sigma_pos);
    p.p_flip = j.value("p_flip", p.p_flip);
    p.sigma_emb = j.value("sigma_emb", p.sigma_emb);
    return p;
}

std::vector<double> instance_embedding(const std::string& category, int instance, int dim) {
    DetRng rng(fnv1a(category) * 31 + static_cast<std::uint64_t>(instance));
    std::vector<double> e(static_cast<std::size_t>(dim));
    double norm = 0.0;
    for (auto& v : e) {
        v = rng.uniform(-1.0, 1.0);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (auto& v : e) v /= norm;
    }
    return e;
}

namespace {

double wrap_angle(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

}  // namespace

FrameObservation render_frame(const SyntheticScene& scene, const CameraPose& eye,
                              const SensorParams& sensor, const NoiseParams& noise, DetRng& rng,
                              std::int64_t frame_id, const std::string& image_ref,
                              int embedding_dim) {
    FrameObservation obs;
    obs.frame_id = frame_id;
    obs.timestamp = static_cast<double>(frame_id);
    obs.camera_pose = eye;
    obs.image_ref = image_ref;

    std::vector<std::string> category_pool;
    if (noise.p_flip > 0.0) {
        std::set<std::string> cats;
        for (const auto& o : scene.objects) cats.insert(o.category);
        category_pool.assign(cats.begin(), cats.end());
    }

    const double half_fov = sensor.fov_deg * std::numbers::pi / 360.0;
    for (const auto& obj : scene.objects) {
        const Point3 center = obj.cloud.centroid();
        const double dist = eye.position.ground_distance_to(center);
        if (dist > sensor.max_range) continue;
        if (dist > 1e-9) {
            const double bearing =
                std::atan2(center.z - eye.position.z, center.x - eye.position.x);
            if (std::fabs(wrap_angle(bearing - eye.heading)) > half_fov) continue;
        }
        if (!segment_clear(eye.position, center, scene.walls, sensor.los_tau,
                           sensor.los_tau / 2.0)) {
            continue;
        }
        if (noise.p_miss > 0.0 && rng.bernoulli(noise.p_miss)) continue;

        Detection det;
        det.category = obj.category;
        if (noise.p_flip > 0.0 && category_pool.size() > 1 && rng.bernoulli(noise.p_flip)) {
            // mislabel to a different category from the scene
            const auto pick = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(category_pool.size()) - 2));
            std::size_t k = 0;
            for (const auto& cat : category_pool) {
                if (cat == obj.category) continue;
                if (k++ == pick) {
                    det.category = cat;
                    break;
                }
            }
        }

        Point3 offset;
        if (noise.sigma_pos > 0.0) {
            offset = {noise.sigma_pos * rng.normal(), 0.0, noise.sigma_pos * rng.normal()};
        }
        std::vector<Point3> pts = obj.cloud.points();
        if (!(offset == Point3{})) {
            for (auto& p : pts) p = p + offset;
        }
        det.cloud = PointCloud(std::move(pts));
        det.bbox = Aabb::of_points(det.cloud.points());

        // visual identity follows the true object even when the label flips
        det.embedding = instance_embedding(obj.category, obj.id, embedding_dim);
        if (noise.sigma_emb > 0.0) {
            double norm = 0.0;
            for (auto& v : det.embedding) {
                v += noise.sigma_emb * rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (auto& v : det.embedding) v /= norm;
            }
        }

        det.confidence = 1.0 - 0.4 * dist / sensor.max_range;
        det.mask_ref = image_ref + "#m" + std::to_string(obj.id);
        obs.detections.push_back(std::move(det));
    }
    return obs;
}

void reveal_visible(const SyntheticScene& scene, OccupancyGrid& known, const Point3& from,
                    double max_range) {
    const OccupancyGrid& gt = scene.grid;
    const GridIndex own = gt.index_of(from);
    if (gt.in_bounds(own)) known.set(own, gt.at(own));

    constexpr int kRays = 256;
    const double step = gt.cell_size() / 3.0;
    for (int k = 0; k < kRays; ++k) {
        const double ang = 2.0 * std::numbers::pi * k / kRays;
        const double dx = std::cos(ang), dz = std::sin(ang);
        for (double t = step; t <= max_range; t += step) {
            const Point3 p{from.x + t * dx, 0.0, from.z + t * dz};
            const GridIndex idx = gt.index_of(p);
            if (!gt.in_bounds(idx)) break;
            const CellState s = gt.at(idx);
            known.set(idx, s);
            if (s == CellState::Occupied) break;
        }
    }
}

std::vector<Frontier> extract_frontiers(const OccupancyGrid& known, int min_cluster) {
    if (known.count(CellState::Free) == 0) return {};

    const auto is_frontier_cell = [&](const GridIndex& idx) {
        if (known.at(idx) != CellState::Free) return false;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const GridIndex n{idx.col + dc, idx.row + dr};
                if (known.in_bounds(n) && known.at(n) == CellState::Unknown) return true;
            }
        }
        return false;
    };

    std::set<GridIndex> frontier_cells;
    for (int row = 0; row < known.rows(); ++row) {
        for (int col = 0; col < known.cols(); ++col) {
            const GridIndex idx{col, row};
            if (is_frontier_cell(idx)) frontier_cells.insert(idx);
        }
    }

    // 8-connected clustering
    std::vector<std::vector<GridIndex>> clusters;
    std::set<GridIndex> visited;
    for (const auto& seed : frontier_cells) {
        if (visited.count(seed)) continue;
        std::vector<GridIndex> cluster;
        std::vector<GridIndex> stack{seed};
        visited.insert(seed);
        while (!stack.empty()) {
            const GridIndex cur = stack.back();
            stack.pop_back();
            cluster.push_back(cur);
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const GridIndex n{cur.col + dc, cur.row + dr};
                    if (frontier_cells.count(n) && !visited.count(n)) {
                        visited.insert(n);
                        stack.push_back(n);
                    }
                }
            }
        }
        if (static_cast<int>(cluster.size()) >= min_cluster) {
            clusters.push_back(std::move(cluster));
        }
    }

    // representative: member nearest the centroid, ties lexicographic
    std::vector<Frontier> frontiers;
    for (auto& cluster : clusters) {
        std::sort(cluster.begin(), cluster.end());
        double mc = 0.0, mr = 0.0;
        for (const auto& c : cluster) {
            mc += c.col;
            mr += c.row;
        }
        mc /= static_cast<double>(cluster.size());
        mr /= static_cast<double>(cluster.size());
        GridIndex rep = cluster.front();
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : cluster) {
            const double d = (c.col - mc) * (c.col - mc) + (c.row - mr) * (c.row - mr);
            if (d < best) {
                best = d;
                rep = c;
            }
        }
        Frontier f;
        f.cell = rep;
        f.position = known.center_of(rep);
        f.cluster_size = static_cast<int>(cluster.size());
        frontiers.push_back(std::move(f));
    }
    std::sort(frontiers.begin(), frontiers.end(), [](const Frontier& a, const Frontier& b) {
        if (a.cluster_size != b.cluster_size) return a.cluster_size > b.cluster_size;
        return a.cell < b.cell;
    });
    for (std::size_t i = 0; i < frontiers.size(); ++i) frontiers[i].id = static_cast<int>(i);
    return frontiers;
}

void annotate_frontiers(std::vector<Frontier>& frontiers, const SyntheticScene& scene,
                        double peek_radius) {
    for (auto& f : frontiers) {
        f.room = scene.rooms.room_at(f.position);
        for (const auto& obj : scene.objects) {
            if (f.position.ground_distance_to(obj.cloud.centroid()) <= peek_radius) {
                f.categories[obj.category] += 1;
            }
        }
    }
}

std::vector<FrontierView> frontier_views(const std::vector<Frontier>& frontiers) {
    std::vector<FrontierView> views;
    views.reserve(frontiers.size());
    for (const auto& f : frontiers) {
        FrontierView v;
        v.id = f.id;
        v.position = f.position;
        v.room = f.room;
        v.category_histogram = f.categories;
        views.push_back(std::move(v));
    }
    return views;
}

// ---------------------------------------------------------------------------
// Path planning

namespace {

struct Move {
    int dc, dr;
    double cost;
};

constexpr Move kMoves[8] = {{1, 0, 1.0},  {-1, 0, 1.0}, {0, 1, 1.0},  {0, -1, 1.0},
                            {1, 1, std::numbers::sqrt2},  {1, -1, std::numbers::sqrt2},
                            {-1, 1, std::numbers::sqrt2}, {-1, -1, std::numbers::sqrt2}};

std::vector<std::uint8_t> traversable_mask(const OccupancyGrid& grid, double clearance) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.cols()) * grid.rows(), 0);
    for (int row = 0; row < grid.rows(); ++row) {
        for (int col = 0; col < grid.cols(); ++col) {
            const GridIndex idx{col, row};
            mask[static_cast<std::size_t>(row) * grid.cols() + col] =
                grid.is_traversable(grid.center_of(idx), clearance) ? 1 : 0;
        }
    }
    return mask;
}

struct QueueEntry {
    double f;
    double g;
    int cell;
    bool operator>(const QueueEntry& o) const {
        if (f != o.f) return f > o.f;
        if (g != o.g) return g > o.g;
        return cell > o.cell;
    }
};

}  // namespace

std::optional<PathResult> plan_path(const OccupancyGrid& grid, const GridIndex& from,
                                    const GridIndex& to, double clearance) {
    if (!grid.in_bounds(from) || !grid.in_bounds(to)) return std::nullopt;
    const int cols = grid.cols();
    const auto flat = [cols](const GridIndex& i) { return i.row * cols + i.col; };
    const auto mask = traversable_mask(grid, clearance);
    if (!mask[flat(from)] || !mask[flat(to)]) return std::nullopt;

    const auto heuristic = [&](int cell) {
        const int dc = std::abs(cell % cols - to.col);
        const int dr = std::abs(cell / cols - to.row);
        return std::numbers::sqrt2 * std::min(dc, dr) + std::abs(dc - dr);
    };

    const std::size_t n = mask.size();
    std::vector<double> g(n, std::numeric_limits<double>::infinity());
    std::vector<int> parent(n, -1);
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
    g[flat(from)] = 0.0;
    open.push({heuristic(flat(from)), 0.0, flat(from)});

    while (!open.empty()) {
        const QueueEntry top = open.top();
        open.pop();
        if (top.g > g[top.cell]) continue;
        if (top.cell == flat(to)) break;
        const int col = top.cell % cols;
        const int row = top.cell / cols;
        for (const Move& m : kMoves) {
            const GridIndex next{col + m.dc, row + m.dr};
            if (!grid.in_bounds(next)) continue;
            if (!mask[flat(next)]) continue;
            if (m.dc != 0 && m.dr != 0) {
                // no corner cutting: both orthogonal neighbors must be free
                if (!mask[row * cols + (col + m.dc)] || !mask[(row + m.dr) * cols + col]) {
                    continue;
                }
            }
            const double ng = top.g + m.cost;
            if (ng < g[flat(next)]) {
                g[flat(next)] = ng;
                parent[flat(next)] = top.cell;
                open.push({ng + heuristic(flat(next)), ng, flat(next)});
            }
        }
    }

    if (!std::isfinite(g[flat(to)])) return std::nullopt;
    PathResult result;
    result.length_m = g[flat(to)] * grid.cell_size();
    std::vector<GridIndex> rev;
    for (int cell = flat(to); cell != -1; cell = parent[cell]) {
        rev.push_back({cell % cols, cell / cols});
    }
    result.cells.assign(rev.rbegin(), rev.rend());
    return result;
}

double shortest_path(const OccupancyGrid& grid, const Point3& a, const Point3& b,
                     double clearance) {
    const GridIndex from = grid.index_of(a);
    const GridIndex to = grid.index_of(b);
    if (!grid.in_bounds(from) || !grid.is_traversable(grid.center_of(from), clearance) ||
        !grid.in_bounds(to) || !grid.is_traversable(grid.center_of(to), clearance)) {
        throw std::invalid_argument("shortest_path: endpoint not traversable");
    }
    auto path = plan_path(grid, from, to, clearance);
    if (!path) throw Error("disconnected");
    return path->length_m;
}

std::vector<double> distance_field(const OccupancyGrid& grid, const GridIndex& from,
                                   double clearance) {
    const int cols = grid.cols();
    const auto mask = traversable_mask(grid, clearance);
    std::vector<double> dist(mask.size(), std::numeric_limits<double>::infinity());
    if (!grid.in_bounds(from) || !mask[static_cast<std::size_t>(from.row) * cols + from.col]) {
        return dist;
    }
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
    dist[static_cast<std::size_t>(from.row) * cols + from.col] = 0.0;
    open.push({0.0, 0.0, from.row * cols + from.col});
    while (!open.empty()) {
        const QueueEntry top = open.top();
        open.pop();
        if (top.g > dist[top.cell]) continue;
        const int col = top.cell % cols;
        const int row = top.cell / cols;
        for (const Move& m : kMoves) {
            const GridIndex next{col + m.dc, row + m.dr};
            if (!grid.in_bounds(next)) continue;
            const std::size_t ni = static_cast<std::size_t>(next.row) * cols + next.col;
            if (!mask[ni]) continue;
            if (m.dc != 0 && m.dr != 0) {
                if (!mask[row * cols + (col + m.dc)] || !mask[(row + m.dr) * cols + col]) {
                    continue;
                }
            }
            const double ng = top.g + m.cost;
            if (ng < dist[ni]) {
                dist[ni] = ng;
                open.push({ng, ng, static_cast<int>(ni)});
            }
        }
    }
    for (auto& d : dist) {
        if (std::isfinite(d)) d *= grid.cell_size();
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Metrics

double EpisodeResult::spl_term() const {
    if (!success) return 0.0;
    const double denom = std::max(shortest_path_m, agent_path_m);
    if (denom <= 0.0) return 1.0;  // started inside the success region
    return shortest_path_m / denom;
}

json EpisodeResult::to_json() const {
    return json{{"scene", scene},
                {"goal", goal_name},
                {"kind", to_string(kind)},
                {"success", success},
                {"shortest_path_m", shortest_path_m},
                {"agent_path_m", agent_path_m},
                {"steps_used", steps_used},
                {"stop_position", json::array({stop_position.x, stop_position.y, stop_position.z})},
                {"dist_to_nearest_viewpoint", dist_to_nearest_viewpoint},
                {"failure_reason", failure_reason}};
}

EpisodeResult EpisodeResult::from_json(const json& j) {
    EpisodeResult r;
    r.scene = j.value("scene", "");
    r.goal_name = j.value("goal", "");
    r.kind = goal_kind_from_string(j.value("kind", "category"));
    r.success = j.at("success").get<bool>();
    r.shortest_path_m = j.at("shortest_path_m").get<double>();
    r.agent_path_m = j.at("agent_path_m").get<double>();
    r.steps_used = j.value("steps_used", 0);
    const auto& sp = j.at("stop_position");
    r.stop_position = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    r.dist_to_nearest_viewpoint = j.value("dist_to_nearest_viewpoint", 0.0);
    r.failure_reason = j.value("failure_reason", "");
    return r;
}

Metrics compute_metrics(std::span<const EpisodeResult> results) {
    if (results.empty()) throw std::invalid_argument("compute_metrics: empty result set");
    Metrics m;
    m.count = static_cast<int>(results.size());
    for (const auto& r : results) {
        m.sr += r.success ? 1.0 : 0.0;
        m.spl += r.spl_term();
    }
    m.sr /= m.count;
    m.spl /= m.count;
    return m;
}

}  // namespace msgnav
