#include "msgnav/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "msgnav/errors.hpp"
#include "msgnav/reasoning.hpp"
#include "msgnav/rng.hpp"

namespace msgnav {

namespace {

using nlohmann::json;

std::int64_t voxel_key(const Point3& p, double cell) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z / cell));
    constexpr std::int64_t off = 1ll << 20;
    return ((cx + off) << 42) | ((cy + off) << 21) | (cz + off);
}

/// Keeps the first point per voxel, preserving input order.
std::vector<Point3> dedup_points(const std::vector<Point3>& pts, double cell) {
    std::set<std::int64_t> seen;
    std::vector<Point3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        if (seen.insert(voxel_key(p, cell)).second) out.push_back(p);
    }
    return out;
}

json point_to_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 point_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json aabb_to_json(const Aabb& b) {
    return json{{"min", point_to_json(b.min)}, {"max", point_to_json(b.max)}};
}

Aabb aabb_from_json(const json& j) {
    return {point_from_json(j.at("min")), point_from_json(j.at("max"))};
}

}  // namespace

json GraphParams::to_json() const {
    return json{{"adjacency_threshold", adjacency_threshold},
                {"iou_min", iou_min},
                {"match_dist", match_dist},
                {"sim_min", sim_min},
                {"min_confidence", min_confidence},
                {"dedup_voxel", dedup_voxel},
                {"embedding_dim", embedding_dim}};
}

GraphParams GraphParams::from_json(const json& j) {
    GraphParams p;
    p.adjacency_threshold = j.value("adjacency_threshold", p.adjacency_threshold);
    p.iou_min = j.value("iou_min", p.iou_min);
    p.match_dist = j.value("match_dist", p.match_dist);
    p.sim_min = j.value("sim_min", p.sim_min);
    p.min_confidence = j.value("min_confidence", p.min_confidence);
    p.dedup_voxel = j.value("dedup_voxel", p.dedup_voxel);
    p.embedding_dim = j.value("embedding_dim", p.embedding_dim);
    return p;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// EdgeStore

void EdgeStore::add(const IdPair& pair, const std::string& image_ref) {
    if (pair.first == pair.second) throw IntegrityError("EdgeStore: self-pair rejected");
    const IdPair key = make_pair_key(pair.first, pair.second);
    edges_[key].insert(image_ref);
    assoc_[image_ref].insert(key);
}

void EdgeStore::check_consistency() const {
    for (const auto& [pair, images] : edges_) {
        if (pair.first >= pair.second) throw IntegrityError("EdgeStore: non-normalized pair");
        if (images.empty()) throw IntegrityError("EdgeStore: edge with empty image set");
        for (const auto& img : images) {
            auto it = assoc_.find(img);
            if (it == assoc_.end() || it->second.count(pair) == 0) {
                throw IntegrityError("EdgeStore: edge image missing from assoc");
            }
        }
    }
    for (const auto& [img, pairs] : assoc_) {
        if (pairs.empty()) throw IntegrityError("EdgeStore: assoc image with no pairs");
        for (const auto& pair : pairs) {
            auto it = edges_.find(pair);
            if (it == edges_.end() || it->second.count(img) == 0) {
                throw IntegrityError("EdgeStore: assoc pair missing from edges");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// extract

std::vector<ObjectNode> extract_frame_objects(const FrameObservation& obs,
                                              const Vocabulary& vocab, const RoomMap& rooms,
                                              const GraphParams& params, ExtractStats* stats) {
    std::vector<ObjectNode> out;
    for (const auto& det : obs.detections) {
        if (det.confidence < params.min_confidence) {
            if (stats) ++stats->dropped_low_confidence;
            continue;
        }
        if (!vocab.contains(det.category)) {
            if (stats) ++stats->dropped_unknown_category;
            continue;
        }
        if (det.cloud.empty()) throw std::invalid_argument("detection with empty point cloud");
        if (static_cast<int>(det.embedding.size()) != params.embedding_dim) {
            throw std::invalid_argument("detection embedding has wrong dimension");
        }

        ObjectNode node;
        node.category = det.category;
        PointCloud deduped(dedup_points(det.cloud.points(), params.dedup_voxel));
        node.position = deduped.centroid();
        node.cloud = std::move(deduped);
        node.bbox = (det.bbox == Aabb{}) ? Aabb::of_points(node.cloud.points()) : det.bbox;
        node.mask_ref = det.mask_ref;
        node.embedding = det.embedding;
        node.room = rooms.room_at(node.position);
        node.observations = 1;
        node.votes[det.category] = {1, obs.frame_id};
        out.push_back(std::move(node));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SceneGraph

SceneGraph::SceneGraph(GraphParams params) : params_(params) {}

const ObjectNode& SceneGraph::object(ObjectId id) const {
    auto it = objects_.find(id);
    if (it == objects_.end()) throw IntegrityError("SceneGraph: unknown object id");
    return it->second;
}

MatchResult SceneGraph::match_objects(const std::vector<ObjectNode>& frame_objs) const {
    struct Scored {
        double score;
        std::size_t frame_index;
        ObjectId node_id;
    };
    std::vector<Scored> candidates;
    for (std::size_t i = 0; i < frame_objs.size(); ++i) {
        const ObjectNode& fo = frame_objs[i];
        for (const auto& [id, node] : objects_) {
            const double cos = cosine_similarity(fo.embedding, node.embedding);
            const bool visually_same = fo.category == node.category || cos >= params_.sim_min;
            if (!visually_same) continue;
            const double iou = fo.bbox.iou(node.bbox);
            const double dist = fo.position.distance_to(node.position);
            const bool spatially_same = iou >= params_.iou_min || dist <= params_.match_dist;
            if (!spatially_same) continue;
            candidates.push_back({0.5 * iou + 0.5 * cos, i, id});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
        return a.node_id < b.node_id;
    });

    MatchResult result;
    std::set<std::size_t> used_frame;
    std::set<ObjectId> used_node;
    for (const auto& c : candidates) {
        if (used_frame.count(c.frame_index) || used_node.count(c.node_id)) continue;
        used_frame.insert(c.frame_index);
        used_node.insert(c.node_id);
        result.matches.push_back({c.frame_index, c.node_id, c.score});
    }
    for (std::size_t i = 0; i < frame_objs.size(); ++i) {
        if (!used_frame.count(i)) result.unmatched.push_back(i);
    }
    return result;
}

ObjectNode SceneGraph::make_node(const ObjectNode& frame_obj, std::int64_t frame_id) {
    ObjectNode node = frame_obj;
    node.id = next_id_++;
    node.observations = 1;
    node.votes.clear();
    node.votes[node.category] = {1, frame_id};
    return node;
}

void SceneGraph::merge_into(ObjectNode& node, const ObjectNode& frame_obj,
                            std::int64_t frame_id) {
    // Cloud union with voxel de-dup: existing points keep their voxels,
    // new points land only in unoccupied ones.
    std::set<std::int64_t> seen;
    for (const auto& p : node.cloud.points()) seen.insert(voxel_key(p, params_.dedup_voxel));
    for (const auto& p : frame_obj.cloud.points()) {
        if (seen.insert(voxel_key(p, params_.dedup_voxel)).second) node.cloud.add(p);
    }

    const double n = static_cast<double>(node.observations);
    if (node.embedding.size() == frame_obj.embedding.size()) {
        for (std::size_t i = 0; i < node.embedding.size(); ++i) {
            node.embedding[i] = (node.embedding[i] * n + frame_obj.embedding[i]) / (n + 1.0);
        }
    }
    node.bbox = node.bbox.united(frame_obj.bbox);
    node.position = node.cloud.centroid();
    if (frame_obj.mask_ref) node.mask_ref = frame_obj.mask_ref;
    if (!frame_obj.room.empty()) node.room = frame_obj.room;
    node.observations += 1;

    auto& vote = node.votes[frame_obj.category];
    vote.first += 1;
    vote.second = frame_id;

    // Majority category; ties go to the most recent vote, then the
    // lexicographically smallest name for totality.
    const std::string* best = nullptr;
    std::pair<int, std::int64_t> best_vote{0, -1};
    for (const auto& [cat, v] : node.votes) {
        const bool wins = v.first > best_vote.first ||
                          (v.first == best_vote.first && v.second > best_vote.second);
        if (!best || wins) {
            best = &cat;
            best_vote = v;
        }
    }
    node.category = *best;
}

std::vector<ObjectId> SceneGraph::merge_objects(const std::vector<ObjectNode>& frame_objs,
                                                const MatchResult& matches) {
    std::vector<ObjectId> resolved(frame_objs.size(), 0);
    for (const auto& m : matches.matches) {
        auto it = objects_.find(m.node_id);
        if (it == objects_.end()) throw IntegrityError("merge_objects: match to missing id");
        if (m.frame_index >= frame_objs.size()) {
            throw IntegrityError("merge_objects: match to missing frame object");
        }
        merge_into(it->second, frame_objs[m.frame_index], last_frame_id_);
        resolved[m.frame_index] = m.node_id;
    }
    for (std::size_t idx : matches.unmatched) {
        ObjectNode node = make_node(frame_objs[idx], last_frame_id_);
        const ObjectId id = node.id;
        objects_.emplace(id, std::move(node));
        resolved[idx] = id;
    }
    return resolved;
}

std::set<IdPair> SceneGraph::co_occurring_pairs(const std::vector<ObjectId>& frame_ids,
                                                double theta) const {
    std::set<ObjectId> unique_ids(frame_ids.begin(), frame_ids.end());
    std::set<IdPair> pairs;
    for (auto a = unique_ids.begin(); a != unique_ids.end(); ++a) {
        auto b = a;
        for (++b; b != unique_ids.end(); ++b) {
            const double dist = object(*a).position.distance_to(object(*b).position);
            if (dist <= theta) pairs.insert(make_pair_key(*a, *b));
        }
    }
    return pairs;
}

void SceneGraph::update_edges(const std::set<IdPair>& pairs, const std::string& image_ref,
                              std::int64_t frame_id) {
    if (pairs.empty()) return;
    for (const auto& pair : pairs) {
        if (!has_object(pair.first) || !has_object(pair.second)) {
            throw IntegrityError("update_edges: pair references unknown object");
        }
        edges_.add(pair, image_ref);
    }
    frames_[image_ref] = frame_id;
}

void SceneGraph::update(const FrameObservation& obs, const Vocabulary& vocab,
                        const RoomMap& rooms) {
    if (obs.frame_id <= last_frame_id_) throw Error("non-monotone frame");
    last_frame_id_ = obs.frame_id;

    ExtractStats stats;
    const auto frame_objs = extract_frame_objects(obs, vocab, rooms, params_, &stats);
    dropped_detections_ += stats.dropped_low_confidence + stats.dropped_unknown_category;

    const MatchResult matches = match_objects(frame_objs);
    const auto ids = merge_objects(frame_objs, matches);
    const auto pairs = co_occurring_pairs(ids, params_.adjacency_threshold);
    update_edges(pairs, obs.image_ref, obs.frame_id);
}

json SceneGraph::to_json() const {
    json objects = json::array();
    for (const auto& [id, node] : objects_) {
        json votes = json::object();
        for (const auto& [cat, v] : node.votes) {
            votes[cat] = json::array({v.first, v.second});
        }
        json cloud = json::array();
        for (const auto& p : node.cloud.points()) cloud.push_back(point_to_json(p));
        json embedding = json::array();
        for (double e : node.embedding) embedding.push_back(e);
        json obj{{"id", id},
                 {"category", node.category},
                 {"position", point_to_json(node.position)},
                 {"bbox", aabb_to_json(node.bbox)},
                 {"room", node.room},
                 {"observations", node.observations},
                 {"embedding", embedding},
                 {"votes", votes},
                 {"cloud", cloud}};
        if (node.mask_ref) obj["mask_ref"] = *node.mask_ref;
        objects.push_back(std::move(obj));
    }

    json edges = json::array();
    for (const auto& [pair, images] : edges_.edges()) {
        json imgs = json::array();
        for (const auto& img : images) imgs.push_back(img);
        edges.push_back(json{{"pair", json::array({pair.first, pair.second})}, {"images", imgs}});
    }

    json assoc = json::array();
    for (const auto& [img, pairs] : edges_.assoc()) {
        json ps = json::array();
        for (const auto& pair : pairs) ps.push_back(json::array({pair.first, pair.second}));
        assoc.push_back(json{{"image", img}, {"pairs", ps}});
    }

    json frames = json::array();
    for (const auto& [img, fid] : frames_) {
        frames.push_back(json{{"image", img}, {"frame_id", fid}});
    }

    return json{{"format_version", 1},
                {"params", params_.to_json()},
                {"next_id", next_id_},
                {"last_frame_id", last_frame_id_},
                {"dropped_detections", dropped_detections_},
                {"objects", objects},
                {"edges", edges},
                {"assoc", assoc},
                {"frames", frames}};
}

SceneGraph SceneGraph::from_json(const json& j) {
    if (j.value("format_version", 0) != 1) {
        throw ConfigError("scene graph snapshot: unsupported format_version");
    }
    SceneGraph g(GraphParams::from_json(j.at("params")));
    g.next_id_ = j.at("next_id").get<ObjectId>();
    g.last_frame_id_ = j.at("last_frame_id").get<std::int64_t>();
    g.dropped_detections_ = j.value("dropped_detections", 0);

    for (const auto& obj : j.at("objects")) {
        ObjectNode node;
        node.id = obj.at("id").get<ObjectId>();
        node.category = obj.at("category").get<std::string>();
        node.position = point_from_json(obj.at("position"));
        node.bbox = aabb_from_json(obj.at("bbox"));
        node.room = obj.value("room", "");
        node.observations = obj.at("observations").get<int>();
        if (obj.contains("mask_ref")) node.mask_ref = obj.at("mask_ref").get<std::string>();
        for (const auto& e : obj.at("embedding")) node.embedding.push_back(e.get<double>());
        for (const auto& [cat, v] : obj.at("votes").items()) {
            node.votes[cat] = {v.at(0).get<int>(), v.at(1).get<std::int64_t>()};
        }
        std::vector<Point3> pts;
        for (const auto& p : obj.at("cloud")) pts.push_back(point_from_json(p));
        node.cloud = PointCloud(std::move(pts));
        g.objects_.emplace(node.id, std::move(node));
    }
    for (const auto& e : j.at("edges")) {
        const auto& pair = e.at("pair");
        const IdPair key{pair.at(0).get<ObjectId>(), pair.at(1).get<ObjectId>()};
        for (const auto& img : e.at("images")) {
            g.edges_.add(key, img.get<std::string>());
        }
    }
    for (const auto& f : j.at("frames")) {
        g.frames_[f.at("image").get<std::string>()] = f.at("frame_id").get<std::int64_t>();
    }
    // assoc is reconstructed by EdgeStore::add; verify it matches the
    // serialized form rather than trusting it.
    g.edges_.check_consistency();
    return g;
}

std::string SceneGraph::snapshot_hash() const {
    std::ostringstream out;
    out << std::hex << fnv1a(to_json().dump());
    return out.str();
}

void SceneGraph::check_invariants(double centroid_tol) const {
    edges_.check_consistency();
    for (const auto& [pair, images] : edges_.edges()) {
        if (!has_object(pair.first) || !has_object(pair.second)) {
            throw IntegrityError("invariant: edge endpoint missing from object set");
        }
        for (const auto& img : images) {
            if (frames_.find(img) == frames_.end()) {
                throw IntegrityError("invariant: edge image missing from frame table");
            }
        }
    }
    for (const auto& [id, node] : objects_) {
        if (id != node.id) throw IntegrityError("invariant: object map key mismatch");
        if (node.cloud.empty()) throw IntegrityError("invariant: object with empty cloud");
        const Point3 c = node.cloud.centroid();
        if (c.distance_to(node.position) > centroid_tol) {
            throw IntegrityError("invariant: position deviates from cloud centroid");
        }
    }
}

}  // namespace msgnav
