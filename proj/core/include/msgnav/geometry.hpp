#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace msgnav {

/// 3D point in meters. The Y axis is up: viewpoint sampling and camera
/// heights treat component [1] as height above the ground plane (X, Z).
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Point3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double distance_to(const Point3& o) const { return (*this - o).norm(); }
    /// Distance ignoring the vertical component.
    double ground_distance_to(const Point3& o) const {
        const double dx = x - o.x, dz = z - o.z;
        return std::sqrt(dx * dx + dz * dz);
    }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Axis-aligned box. Degenerate (zero-volume) boxes are legal; IoU between
/// two zero-volume boxes is 1 when identical and 0 otherwise.
struct Aabb {
    Point3 min;
    Point3 max;

    static Aabb of_point(const Point3& p) { return {p, p}; }
    static Aabb of_points(const std::vector<Point3>& pts);

    void expand(const Point3& p);
    Aabb united(const Aabb& o) const;
    double volume() const;
    double intersection_volume(const Aabb& o) const;
    double iou(const Aabb& o) const;
    bool operator==(const Aabb& o) const { return min == o.min && max == o.max; }
};

namespace detail {

/// Uniform voxel hash over a fixed point set. Answers exact nearest-point
/// distance (ring-expansion with the (s-1)*cell lower bound) and fast
/// "any point closer than r" queries used by clearance tests.
class VoxelIndex {
public:
    VoxelIndex(const std::vector<Point3>& points, double cell);

    double nearest_distance(const Point3& q) const;
    bool any_within(const Point3& q, double radius) const;
    double cell() const { return cell_; }

private:
    struct Bucket {
        std::int64_t key;
        std::vector<std::uint32_t> indices;
    };

    std::int64_t key_of(std::int64_t cx, std::int64_t cy, std::int64_t cz) const;
    const std::vector<std::uint32_t>* find(std::int64_t cx, std::int64_t cy, std::int64_t cz) const;

    // raw data pointer: stays valid when the owning vector object moves
    const Point3* points_ = nullptr;
    std::size_t count_ = 0;
    double cell_;
    // open addressing keyed by packed cell coords; sized at build time
    std::vector<std::int64_t> keys_;
    std::vector<std::vector<std::uint32_t>> slots_;
    std::size_t mask_ = 0;
    std::int64_t max_shell_ = 0;  // upper bound on ring expansion
    std::int64_t min_cx_ = 0, min_cy_ = 0, min_cz_ = 0;
    std::int64_t max_cx_ = 0, max_cy_ = 0, max_cz_ = 0;
};

}  // namespace detail

/// Ordered point set with a lazily built voxel-hash index for
/// nearest-distance queries. Copying resets the index (rebuilt on demand);
/// once built, queries are const and safe to share across threads.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points_(std::move(pts)) {}

    PointCloud(const PointCloud& o) : points_(o.points_), index_cell_(o.index_cell_) {}
    PointCloud& operator=(const PointCloud& o) {
        points_ = o.points_;
        index_cell_ = o.index_cell_;
        index_.reset();
        return *this;
    }
    PointCloud(PointCloud&&) = default;
    PointCloud& operator=(PointCloud&&) = default;

    const std::vector<Point3>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    void add(const Point3& p) {
        points_.push_back(p);
        index_.reset();
    }
    void append(const std::vector<Point3>& pts) {
        points_.insert(points_.end(), pts.begin(), pts.end());
        index_.reset();
    }
    void reserve(std::size_t n) { points_.reserve(n); }

    /// Voxel edge used when the index is (re)built. Defaults to 0.1 m,
    /// matching the default obstruction distance tau.
    void set_index_cell(double cell);

    /// Builds the index now; queries build it on demand otherwise.
    void build_index() const;

    /// Arithmetic mean of all points. Throws on an empty cloud.
    Point3 centroid() const;

    /// Exact minimum Euclidean distance from q to any point.
    /// Matches a linear scan bit-for-bit. Throws on an empty cloud.
    double nearest_distance(const Point3& q) const;

    /// True iff some point lies strictly closer than `radius` to q.
    /// Equivalent to nearest_distance(q) < radius but exits early.
    /// An empty cloud has no such point.
    bool any_within(const Point3& q, double radius) const;

private:
    std::vector<Point3> points_;
    double index_cell_ = 0.1;
    mutable std::unique_ptr<detail::VoxelIndex> index_;
};

/// True iff every sample along the segment between v and p keeps at least
/// `tau` clearance from the scene cloud. Samples are spaced at most `step`
/// apart within the clipped parameter range [tau, |p-v|-tau]; an empty
/// range (segment shorter than 2*tau) is vacuously clear, as is an empty
/// scene. Symmetric in (v, p).
bool segment_clear(const Point3& v, const Point3& p, const PointCloud& scene, double tau,
                   double step);

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct GridIndex {
    int col = 0;  // along +X
    int row = 0;  // along +Z
    bool operator==(const GridIndex& o) const { return col == o.col && row == o.row; }
    bool operator<(const GridIndex& o) const {
        return row != o.row ? row < o.row : col < o.col;
    }
};

/// 2D occupancy grid over the ground plane (X across columns, Z across
/// rows); Y is ignored on projection. Cells outside the bounds are treated
/// as not free by every query.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(Point3 origin, double cell_size, int cols, int rows,
                  CellState fill = CellState::Unknown);

    int cols() const { return cols_; }
    int rows() const { return rows_; }
    double cell_size() const { return cell_size_; }
    const Point3& origin() const { return origin_; }

    bool in_bounds(const GridIndex& i) const {
        return i.col >= 0 && i.col < cols_ && i.row >= 0 && i.row < rows_;
    }
    CellState at(const GridIndex& i) const;
    void set(const GridIndex& i, CellState s);

    GridIndex index_of(const Point3& p) const;
    /// World position of a cell center at the given height.
    Point3 center_of(const GridIndex& i, double y = 0.0) const;

    /// True iff the projection of v lands in a free cell and every cell
    /// whose center lies within `clearance` of the projection is free
    /// (out-of-bounds cells count as not free).
    bool is_traversable(const Point3& v, double clearance) const;

    std::size_t count(CellState s) const;

private:
    Point3 origin_;
    double cell_size_ = 0.25;
    int cols_ = 0;
    int rows_ = 0;
    std::vector<CellState> cells_;
};

}  // namespace msgnav
