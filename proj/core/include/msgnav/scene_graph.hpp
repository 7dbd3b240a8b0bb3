#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "msgnav/geometry.hpp"

namespace msgnav {

class Vocabulary;  // reasoning.hpp

using ObjectId = std::int64_t;
/// Unordered object pair, stored normalized (first < second).
using IdPair = std::pair<ObjectId, ObjectId>;

inline IdPair make_pair_key(ObjectId a, ObjectId b) {
    return a < b ? IdPair{a, b} : IdPair{b, a};
}

/// Axis-aligned room rectangles on the ground plane; first match wins.
/// Stands in for however a real perception stack derives room labels.
struct RoomRect {
    std::string name;
    double x0 = 0.0, z0 = 0.0, x1 = 0.0, z1 = 0.0;
    bool contains(const Point3& p) const {
        return p.x >= x0 && p.x <= x1 && p.z >= z0 && p.z <= z1;
    }
};

struct RoomMap {
    std::vector<RoomRect> rooms;
    std::string room_at(const Point3& p) const {
        for (const auto& r : rooms) {
            if (r.contains(p)) return r.name;
        }
        return "";
    }
};

struct CameraPose {
    Point3 position;
    double heading = 0.0;  // radians, 0 along +X, increasing toward +Z
};

/// One detector hit inside a frame.
struct Detection {
    std::string category;
    double confidence = 1.0;
    PointCloud cloud;
    std::vector<double> embedding;
    Aabb bbox;
    std::optional<std::string> mask_ref;
};

/// A single RGB-D observation, already run through the detector stack.
/// image_ref is the opaque handle under which this frame is stored and
/// referenced by edges.
struct FrameObservation {
    std::int64_t frame_id = 0;
    double timestamp = 0.0;
    CameraPose camera_pose;
    std::vector<Detection> detections;
    std::string image_ref;
};

struct GraphParams {
    double adjacency_threshold = 2.0;  // theta, meters
    double iou_min = 0.25;
    double match_dist = 0.5;   // meters
    double sim_min = 0.8;      // embedding cosine
    double min_confidence = 0.5;
    double dedup_voxel = 0.05;  // meters, cloud union de-duplication
    int embedding_dim = 16;

    nlohmann::json to_json() const;
    static GraphParams from_json(const nlohmann::json& j);
};

/// One tracked object instance. position always equals centroid(cloud).
struct ObjectNode {
    ObjectId id = 0;
    std::string category;
    Point3 position;
    Aabb bbox;
    std::optional<std::string> mask_ref;
    PointCloud cloud;
    std::vector<double> embedding;
    std::string room;

    int observations = 1;
    /// category -> (votes, frame of last vote); majority wins, recency
    /// breaks ties.
    std::map<std::string, std::pair<int, std::int64_t>> votes;
};

/// Image-edge bookkeeping: pair -> set of image refs, plus the reverse
/// association image ref -> set of pairs. The two maps are kept mutually
/// consistent by construction.
class EdgeStore {
public:
    void add(const IdPair& pair, const std::string& image_ref);

    const std::map<IdPair, std::set<std::string>>& edges() const { return edges_; }
    const std::map<std::string, std::set<IdPair>>& assoc() const { return assoc_; }
    std::size_t pair_count() const { return edges_.size(); }
    bool has_pair(const IdPair& p) const { return edges_.count(p) > 0; }

    /// Full-scan bidirectional consistency check; throws IntegrityError on
    /// the first violation.
    void check_consistency() const;

private:
    std::map<IdPair, std::set<std::string>> edges_;
    std::map<std::string, std::set<IdPair>> assoc_;
};

struct ExtractStats {
    int dropped_low_confidence = 0;
    int dropped_unknown_category = 0;
};

struct MatchCandidate {
    std::size_t frame_index = 0;
    ObjectId node_id = 0;
    double score = 0.0;
};

struct MatchResult {
    std::vector<MatchCandidate> matches;     // accepted, one per matched frame object
    std::vector<std::size_t> unmatched;      // frame indices to insert as new nodes
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Frame-local nodes from raw detections: confidence- and vocabulary-
/// filtered, room label assigned from the room map, cloud de-duplicated.
/// Ids are not assigned here (0 placeholder).
std::vector<ObjectNode> extract_frame_objects(const FrameObservation& obs,
                                              const Vocabulary& vocab, const RoomMap& rooms,
                                              const GraphParams& params,
                                              ExtractStats* stats = nullptr);

/// The evolving multi-modal scene graph: object set, image-edge store and
/// frame bookkeeping. Updates are strictly frame-ordered; snapshots are
/// losslessly (de)serializable and byte-stable for identical histories.
class SceneGraph {
public:
    explicit SceneGraph(GraphParams params = {});

    const GraphParams& params() const { return params_; }
    const std::map<ObjectId, ObjectNode>& objects() const { return objects_; }
    const EdgeStore& edge_store() const { return edges_; }
    /// image_ref -> frame_id for every frame referenced by some edge.
    const std::map<std::string, std::int64_t>& frame_info() const { return frames_; }

    std::size_t object_count() const { return objects_.size(); }
    std::size_t edge_count() const { return edges_.pair_count(); }
    std::int64_t last_frame_id() const { return last_frame_id_; }
    const ObjectNode& object(ObjectId id) const;
    bool has_object(ObjectId id) const { return objects_.count(id) > 0; }

    /// Greedy best-score assignment of frame objects to existing nodes.
    /// Eligibility: (same category OR cosine >= sim_min) AND
    /// (IoU >= iou_min OR centroid distance <= match_dist).
    MatchResult match_objects(const std::vector<ObjectNode>& frame_objs) const;

    /// Applies a match result: merges matched frame objects into their
    /// nodes, inserts the rest with fresh ids. Returns the global id each
    /// frame object resolved to, in frame order.
    std::vector<ObjectId> merge_objects(const std::vector<ObjectNode>& frame_objs,
                                        const MatchResult& matches);

    /// All unordered pairs of distinct global ids from this frame whose
    /// node positions are within theta.
    std::set<IdPair> co_occurring_pairs(const std::vector<ObjectId>& frame_ids,
                                        double theta) const;

    /// Appends image_ref to every pair's image set and maintains the
    /// reverse association (set semantics, idempotent per image).
    void update_edges(const std::set<IdPair>& pairs, const std::string& image_ref,
                      std::int64_t frame_id);

    /// One full incremental update: extract -> match -> merge -> pairs ->
    /// edges. Deterministic; rejects non-monotone frame ids.
    void update(const FrameObservation& obs, const Vocabulary& vocab, const RoomMap& rooms);

    int dropped_detections() const { return dropped_detections_; }

    nlohmann::json to_json() const;
    static SceneGraph from_json(const nlohmann::json& j);
    std::string snapshot_hash() const;

    /// Invariant sweep used by tests and fuzzing: edge/assoc consistency,
    /// edge endpoints exist, position==centroid within tol.
    void check_invariants(double centroid_tol = 1e-6) const;

private:
    ObjectNode make_node(const ObjectNode& frame_obj, std::int64_t frame_id);
    void merge_into(ObjectNode& node, const ObjectNode& frame_obj, std::int64_t frame_id);

    GraphParams params_;
    std::map<ObjectId, ObjectNode> objects_;
    EdgeStore edges_;
    std::map<std::string, std::int64_t> frames_;
    ObjectId next_id_ = 1;
    std::int64_t last_frame_id_ = -1;
    int dropped_detections_ = 0;
};

}  // namespace msgnav
