#include "msgnav/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace msgnav {

// ---------------------------------------------------------------------------
// Aabb

Aabb Aabb::of_points(const std::vector<Point3>& pts) {
    if (pts.empty()) throw std::invalid_argument("Aabb::of_points: empty point set");
    Aabb box{pts.front(), pts.front()};
    for (const auto& p : pts) box.expand(p);
    return box;
}

void Aabb::expand(const Point3& p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    min.z = std::min(min.z, p.z);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
    max.z = std::max(max.z, p.z);
}

Aabb Aabb::united(const Aabb& o) const {
    Aabb r = *this;
    r.expand(o.min);
    r.expand(o.max);
    return r;
}

double Aabb::volume() const {
    const double dx = std::max(0.0, max.x - min.x);
    const double dy = std::max(0.0, max.y - min.y);
    const double dz = std::max(0.0, max.z - min.z);
    return dx * dy * dz;
}

double Aabb::intersection_volume(const Aabb& o) const {
    const double dx = std::min(max.x, o.max.x) - std::max(min.x, o.min.x);
    const double dy = std::min(max.y, o.max.y) - std::max(min.y, o.min.y);
    const double dz = std::min(max.z, o.max.z) - std::max(min.z, o.min.z);
    if (dx <= 0.0 || dy <= 0.0 || dz <= 0.0) return 0.0;
    return dx * dy * dz;
}

double Aabb::iou(const Aabb& o) const {
    const double inter = intersection_volume(o);
    const double uni = volume() + o.volume() - inter;
    if (uni <= 0.0) return *this == o ? 1.0 : 0.0;
    return inter / uni;
}

// ---------------------------------------------------------------------------
// VoxelIndex

namespace detail {

namespace {

constexpr std::int64_t kEmptyKey = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kCoordOffset = 1ll << 20;  // 21-bit packed cell coords

std::int64_t floor_div(double v, double cell) {
    return static_cast<std::int64_t>(std::floor(v / cell));
}

std::uint64_t mix_key(std::int64_t key) {
    std::uint64_t z = static_cast<std::uint64_t>(key) + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

VoxelIndex::VoxelIndex(const std::vector<Point3>& points, double cell)
    : points_(points.data()), count_(points.size()), cell_(cell) {
    if (cell <= 0.0) throw std::invalid_argument("VoxelIndex: cell size must be positive");

    std::size_t cap = 16;
    while (cap < count_ * 2 + 2) cap <<= 1;
    keys_.assign(cap, kEmptyKey);
    slots_.resize(cap);
    mask_ = cap - 1;

    bool first = true;
    for (std::uint32_t i = 0; i < count_; ++i) {
        const Point3& p = points_[i];
        const std::int64_t cx = floor_div(p.x, cell_);
        const std::int64_t cy = floor_div(p.y, cell_);
        const std::int64_t cz = floor_div(p.z, cell_);
        if (first) {
            min_cx_ = max_cx_ = cx;
            min_cy_ = max_cy_ = cy;
            min_cz_ = max_cz_ = cz;
            first = false;
        } else {
            min_cx_ = std::min(min_cx_, cx);
            min_cy_ = std::min(min_cy_, cy);
            min_cz_ = std::min(min_cz_, cz);
            max_cx_ = std::max(max_cx_, cx);
            max_cy_ = std::max(max_cy_, cy);
            max_cz_ = std::max(max_cz_, cz);
        }
        const std::int64_t key = key_of(cx, cy, cz);
        std::size_t slot = mix_key(key) & mask_;
        while (keys_[slot] != kEmptyKey && keys_[slot] != key) slot = (slot + 1) & mask_;
        keys_[slot] = key;
        slots_[slot].push_back(i);
    }
}

std::int64_t VoxelIndex::key_of(std::int64_t cx, std::int64_t cy, std::int64_t cz) const {
    return ((cx + kCoordOffset) << 42) | ((cy + kCoordOffset) << 21) | (cz + kCoordOffset);
}

const std::vector<std::uint32_t>* VoxelIndex::find(std::int64_t cx, std::int64_t cy,
                                                   std::int64_t cz) const {
    if (cx < min_cx_ || cx > max_cx_ || cy < min_cy_ || cy > max_cy_ || cz < min_cz_ ||
        cz > max_cz_) {
        return nullptr;
    }
    const std::int64_t key = key_of(cx, cy, cz);
    std::size_t slot = mix_key(key) & mask_;
    while (keys_[slot] != kEmptyKey) {
        if (keys_[slot] == key) return &slots_[slot];
        slot = (slot + 1) & mask_;
    }
    return nullptr;
}

double VoxelIndex::nearest_distance(const Point3& q) const {
    const std::int64_t qx = floor_div(q.x, cell_);
    const std::int64_t qy = floor_div(q.y, cell_);
    const std::int64_t qz = floor_div(q.z, cell_);

    // Once every occupied cell is at Chebyshev distance <= s_max, further
    // shells are empty.
    const auto axis_span = [](std::int64_t v, std::int64_t lo, std::int64_t hi) {
        return std::max(std::llabs(v - lo), std::llabs(v - hi));
    };
    const std::int64_t s_max =
        std::max({axis_span(qx, min_cx_, max_cx_), axis_span(qy, min_cy_, max_cy_),
                  axis_span(qz, min_cz_, max_cz_)});

    double best = std::numeric_limits<double>::infinity();
    const auto scan_cell = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
        const auto* bucket = find(cx, cy, cz);
        if (!bucket) return;
        for (std::uint32_t i : *bucket) {
            best = std::min(best, points_[i].distance_to(q));
        }
    };

    for (std::int64_t s = 0; s <= s_max; ++s) {
        if (s > 0 && static_cast<double>(s - 1) * cell_ >= best) break;
        if (s == 0) {
            scan_cell(qx, qy, qz);
            continue;
        }
        for (std::int64_t dy = -s; dy <= s; ++dy) {
            for (std::int64_t dz = -s; dz <= s; ++dz) {
                scan_cell(qx - s, qy + dy, qz + dz);
                scan_cell(qx + s, qy + dy, qz + dz);
            }
        }
        for (std::int64_t dx = -s + 1; dx <= s - 1; ++dx) {
            for (std::int64_t dz = -s; dz <= s; ++dz) {
                scan_cell(qx + dx, qy - s, qz + dz);
                scan_cell(qx + dx, qy + s, qz + dz);
            }
            for (std::int64_t dy = -s + 1; dy <= s - 1; ++dy) {
                scan_cell(qx + dx, qy + dy, qz - s);
                scan_cell(qx + dx, qy + dy, qz + s);
            }
        }
    }
    return best;
}

bool VoxelIndex::any_within(const Point3& q, double radius) const {
    const std::int64_t qx = floor_div(q.x, cell_);
    const std::int64_t qy = floor_div(q.y, cell_);
    const std::int64_t qz = floor_div(q.z, cell_);

    const auto cell_hit = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
        const auto* bucket = find(cx, cy, cz);
        if (!bucket) return false;
        for (std::uint32_t i : *bucket) {
            if (points_[i].distance_to(q) < radius) return true;
        }
        return false;
    };

    const std::int64_t s_cap =
        static_cast<std::int64_t>(std::floor(radius / cell_)) + 1;
    for (std::int64_t s = 0; s <= s_cap; ++s) {
        if (s > 0 && static_cast<double>(s - 1) * cell_ >= radius) break;
        if (s == 0) {
            if (cell_hit(qx, qy, qz)) return true;
            continue;
        }
        for (std::int64_t dy = -s; dy <= s; ++dy) {
            for (std::int64_t dz = -s; dz <= s; ++dz) {
                if (cell_hit(qx - s, qy + dy, qz + dz)) return true;
                if (cell_hit(qx + s, qy + dy, qz + dz)) return true;
            }
        }
        for (std::int64_t dx = -s + 1; dx <= s - 1; ++dx) {
            for (std::int64_t dz = -s; dz <= s; ++dz) {
                if (cell_hit(qx + dx, qy - s, qz + dz)) return true;
                if (cell_hit(qx + dx, qy + s, qz + dz)) return true;
            }
            for (std::int64_t dy = -s + 1; dy <= s - 1; ++dy) {
                if (cell_hit(qx + dx, qy + dy, qz - s)) return true;
                if (cell_hit(qx + dx, qy + dy, qz + s)) return true;
            }
        }
    }
    return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PointCloud

void PointCloud::set_index_cell(double cell) {
    if (cell <= 0.0) throw std::invalid_argument("PointCloud: index cell must be positive");
    if (cell != index_cell_) {
        index_cell_ = cell;
        index_.reset();
    }
}

void PointCloud::build_index() const {
    if (!index_) index_ = std::make_unique<detail::VoxelIndex>(points_, index_cell_);
}

Point3 PointCloud::centroid() const {
    if (points_.empty()) throw std::invalid_argument("empty point cloud");
    Point3 sum;
    for (const auto& p : points_) sum = sum + p;
    return sum * (1.0 / static_cast<double>(points_.size()));
}

double PointCloud::nearest_distance(const Point3& q) const {
    if (points_.empty()) throw std::invalid_argument("empty point cloud");
    build_index();
    return index_->nearest_distance(q);
}

bool PointCloud::any_within(const Point3& q, double radius) const {
    if (points_.empty()) return false;
    build_index();
    return index_->any_within(q, radius);
}

// ---------------------------------------------------------------------------
// segment_clear

bool segment_clear(const Point3& v, const Point3& p, const PointCloud& scene, double tau,
                   double step) {
    if (tau <= 0.0) throw std::invalid_argument("segment_clear: tau must be positive");
    if (step <= 0.0) throw std::invalid_argument("segment_clear: step must be positive");

    const double length = v.distance_to(p);
    const double t0 = tau;
    const double t1 = length - tau;
    if (t1 < t0) return true;  // empty sample range: vacuously clear
    if (scene.empty()) return true;

    const Point3 dir = (p - v) * (1.0 / length);
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((t1 - t0) / step)));
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n);
        const Point3 q = v + dir * t;
        if (scene.any_within(q, tau)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// OccupancyGrid

OccupancyGrid::OccupancyGrid(Point3 origin, double cell_size, int cols, int rows, CellState fill)
    : origin_(origin), cell_size_(cell_size), cols_(cols), rows_(rows) {
    if (cell_size <= 0.0) throw std::invalid_argument("OccupancyGrid: cell_size must be positive");
    if (cols < 0 || rows < 0) throw std::invalid_argument("OccupancyGrid: negative dimensions");
    cells_.assign(static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows), fill);
}

CellState OccupancyGrid::at(const GridIndex& i) const {
    if (!in_bounds(i)) return CellState::Unknown;
    return cells_[static_cast<std::size_t>(i.row) * cols_ + i.col];
}

void OccupancyGrid::set(const GridIndex& i, CellState s) {
    if (!in_bounds(i)) throw std::out_of_range("OccupancyGrid::set: index out of bounds");
    cells_[static_cast<std::size_t>(i.row) * cols_ + i.col] = s;
}

GridIndex OccupancyGrid::index_of(const Point3& p) const {
    return {static_cast<int>(std::floor((p.x - origin_.x) / cell_size_)),
            static_cast<int>(std::floor((p.z - origin_.z) / cell_size_))};
}

Point3 OccupancyGrid::center_of(const GridIndex& i, double y) const {
    return {origin_.x + (static_cast<double>(i.col) + 0.5) * cell_size_, y,
            origin_.z + (static_cast<double>(i.row) + 0.5) * cell_size_};
}

bool OccupancyGrid::is_traversable(const Point3& v, double clearance) const {
    const GridIndex own = index_of(v);
    if (!in_bounds(own) || at(own) != CellState::Free) return false;
    if (clearance <= 0.0) return true;

    const GridIndex lo = index_of({v.x - clearance, 0.0, v.z - clearance});
    const GridIndex hi = index_of({v.x + clearance, 0.0, v.z + clearance});
    for (int row = lo.row; row <= hi.row; ++row) {
        for (int col = lo.col; col <= hi.col; ++col) {
            const GridIndex idx{col, row};
            const Point3 c = center_of(idx);
            const double dx = c.x - v.x;
            const double dz = c.z - v.z;
            if (dx * dx + dz * dz > clearance * clearance) continue;
            if (!in_bounds(idx) || at(idx) != CellState::Free) return false;
        }
    }
    return true;
}

std::size_t OccupancyGrid::count(CellState s) const {
    std::size_t n = 0;
    for (CellState c : cells_) {
        if (c == s) ++n;
    }
    return n;
}

}  // namespace msgnav
