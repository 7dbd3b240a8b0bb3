#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msgnav/geometry.hpp"
#include "msgnav/reasoning.hpp"
#include "msgnav/scene_graph.hpp"

namespace msgnav {

/// Ground-truth object in a synthetic scene.
struct GtObject {
    int id = 0;
    std::string category;
    std::string room;
    PointCloud cloud;
    Aabb bbox;
    bool blocks = true;  // contributes an occupancy footprint
};

struct SceneGoal {
    std::string name;
    Goal goal;
    int target_id = 0;
};

/// Parameters defining which grid cells count as ground-truth success
/// viewpoints for an object: traversable, within `radius` of the object
/// (ground-plane distance to its nearest point) and with a clear
/// tau-clearance sight line from camera height to the object center.
struct ViewpointGtParams {
    double radius = 1.0;
    double camera_height = 1.5;
    double tau = 0.08;
    double clearance = 0.2;
};

/// Deterministic surface sampling of an axis-aligned box at the given
/// spacing (used by scene files to author walls and furniture clouds).
std::vector<Point3> sample_box_surface(const Point3& min, const Point3& max, double spacing);

/// Bundled data directory (seed vocabulary, scenes, scripts): the
/// MSGNAV_DATA_DIR environment variable when set, else the build-time
/// default.
std::string default_data_dir();

/// Desk-scale stand-in for an embodied benchmark scene: ground-truth
/// objects with sampled clouds, wall clouds, an occupancy grid, room
/// rectangles, an agent start pose and a goal list.
class SyntheticScene {
public:
    static SyntheticScene load(const std::string& path);
    static SyntheticScene from_json(const nlohmann::json& j);

    std::string name;
    OccupancyGrid grid;  // ground truth Free/Occupied
    RoomMap rooms;
    PointCloud walls;
    std::vector<GtObject> objects;
    CameraPose agent_start;  // ground position (y = 0) + heading
    std::vector<SceneGoal> goals;

    const GtObject& object_by_id(int id) const;
    const SceneGoal& goal_by_name(const std::string& name) const;

    /// Walls plus every object cloud (built once, cached).
    const PointCloud& world_cloud() const;

    /// World cloud minus all points voxel-coincident with `target`
    /// (0.05 m cells): the occluder set for visibility scoring.
    PointCloud occluders_excluding(const PointCloud& target) const;

    /// Ground-truth success viewpoints (cell centers), computed by
    /// exhaustive grid scan and cached per (object, params).
    const std::vector<Point3>& success_viewpoints(int object_id,
                                                  const ViewpointGtParams& params) const;

private:
    mutable PointCloud world_cloud_;
    mutable bool world_cloud_built_ = false;
    mutable std::map<std::string, std::vector<Point3>> viewpoint_cache_;
    mutable std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
};

}  // namespace msgnav
