#include "msgnav/key_subgraph.hpp"

#include <algorithm>

#include "msgnav/errors.hpp"

namespace msgnav {

using nlohmann::json;

bool CompactGraph::has_node(ObjectId id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const auto& node, ObjectId v) { return node.first < v; });
    return it != nodes.end() && it->first == id;
}

json CompactGraph::to_json() const {
    json ns = json::array();
    for (const auto& [id, cat] : nodes) ns.push_back(json{{"id", id}, {"category", cat}});
    json adj = json::object();
    for (const auto& [id, neighbors] : adjacency) {
        adj[std::to_string(id)] = neighbors;
    }
    return json{{"nodes", ns}, {"adjacency", adj}};
}

CompactGraph compress(const SceneGraph& graph) {
    CompactGraph out;
    for (const auto& [id, node] : graph.objects()) {
        out.nodes.emplace_back(id, node.category);
    }
    for (const auto& [pair, images] : graph.edge_store().edges()) {
        out.adjacency[pair.first].push_back(pair.second);
        out.adjacency[pair.second].push_back(pair.first);
    }
    for (auto& [id, neighbors] : out.adjacency) std::sort(neighbors.begin(), neighbors.end());
    return out;
}

namespace {

/// 0 = exact case-folded match, 1 = substring either way, 2 = no match.
int category_match_rank(const std::string& category, const std::string& goal_text) {
    const std::string c = fold_case(category);
    const std::string g = fold_case(goal_text);
    if (c.empty() || g.empty()) return 2;
    if (c == g) return 0;
    if (g.find(c) != std::string::npos || c.find(g) != std::string::npos) return 1;
    return 2;
}

}  // namespace

std::set<ObjectId> focus(const CompactGraph& compact, const Goal& goal, Reasoner& reasoner,
                         int k, int step, FocusDiagnostics* diag) {
    if (k < 1) throw std::invalid_argument("focus: k must be >= 1");

    FocusRequest request;
    request.graph = &compact;
    request.goal = goal;
    request.k = k;
    request.step = step;

    std::set<ObjectId> related;
    for (ObjectId id : reasoner.focus(request)) {
        if (static_cast<int>(related.size()) >= k) break;
        if (compact.has_node(id)) {
            related.insert(id);
        } else if (diag) {
            diag->discarded.push_back(id);
        }
    }
    if (!related.empty()) return related;

    // Fallback: deterministic category matching, exact before substring,
    // lowest id first within a rank. Keeps the loop alive on a bad reply.
    if (diag) diag->used_fallback = true;
    const std::string text = goal.match_text();
    for (int rank = 0; rank <= 1 && static_cast<int>(related.size()) < k; ++rank) {
        for (const auto& [id, category] : compact.nodes) {
            if (static_cast<int>(related.size()) >= k) break;
            if (related.count(id)) continue;
            if (category_match_rank(category, text) == rank) related.insert(id);
        }
    }
    return related;
}

CoverResult greedy_cover(const std::set<IdPair>& pairs,
                         const std::map<std::string, std::set<IdPair>>& image_pairs,
                         const std::map<std::string, std::int64_t>& frame_ids) {
    CoverResult result;
    std::set<IdPair> uncovered = pairs;
    while (!uncovered.empty()) {
        const std::string* best = nullptr;
        std::size_t best_count = 0;
        std::int64_t best_frame = 0;
        for (const auto& [image, covered] : image_pairs) {
            std::size_t count = 0;
            for (const auto& p : covered) count += uncovered.count(p);
            if (count == 0) continue;
            auto fit = frame_ids.find(image);
            const std::int64_t frame = fit == frame_ids.end() ? 0 : fit->second;
            // more coverage wins; then oldest frame; then lowest ref
            // (map order already gives lowest ref for strict '>').
            const bool wins = !best || count > best_count ||
                              (count == best_count && frame < best_frame);
            if (wins) {
                best = &image;
                best_count = count;
                best_frame = frame;
            }
        }
        if (!best) {
            throw IntegrityError("greedy_cover: uncovered pair with no candidate image");
        }
        result.selection_order.push_back(*best);
        for (const auto& p : image_pairs.at(*best)) {
            if (uncovered.erase(p) > 0) result.assignment[p] = *best;
        }
    }
    return result;
}

KeySubgraph greedy_prune(const SceneGraph& graph, const std::set<ObjectId>& related) {
    for (ObjectId id : related) {
        if (!graph.has_object(id)) throw IntegrityError("greedy_prune: unknown related id");
    }

    KeySubgraph key;
    key.related = related;
    key.key_objects = related;

    // Filter phase: every pair with at least one related endpoint.
    std::set<IdPair> pairs;
    std::map<std::string, std::set<IdPair>> image_pairs;
    const auto& edges = graph.edge_store().edges();
    const auto& assoc = graph.edge_store().assoc();
    for (const auto& [id, node] : graph.objects()) {
        for (ObjectId rel : related) {
            if (id == rel) continue;
            const IdPair pair = make_pair_key(id, rel);
            auto eit = edges.find(pair);
            if (eit == edges.end()) continue;
            key.key_objects.insert(id);
            pairs.insert(pair);
            for (const auto& image : eit->second) {
                auto ait = assoc.find(image);
                if (ait == assoc.end()) {
                    throw IntegrityError("greedy_prune: edge image missing from assoc");
                }
                image_pairs[image] = ait->second;
            }
        }
    }

    CoverResult cover = greedy_cover(pairs, image_pairs, graph.frame_info());
    key.key_edges = std::move(cover.assignment);
    key.selected_images = std::move(cover.selection_order);
    return key;
}

std::set<std::string> KeySubgraph::distinct_images() const {
    std::set<std::string> out;
    for (const auto& [pair, image] : key_edges) out.insert(image);
    return out;
}

json assemble_key_prompt(const KeySubgraph& key, const SceneGraph& graph) {
    json objects = json::array();
    for (ObjectId id : key.key_objects) {
        const ObjectNode& node = graph.object(id);
        objects.push_back(json{{"id", id},
                               {"category", node.category},
                               {"position",
                                json::array({node.position.x, node.position.y, node.position.z})},
                               {"room", node.room},
                               {"related", key.related.count(id) > 0}});
    }

    // One entry per selected image, annotated with the pairs it certifies.
    std::map<std::string, std::vector<IdPair>> by_image;
    for (const auto& [pair, image] : key.key_edges) by_image[image].push_back(pair);
    json images = json::array();
    for (const auto& [image, pairs] : by_image) {
        if (graph.frame_info().find(image) == graph.frame_info().end()) {
            throw IntegrityError("assemble_key_prompt: image missing from frame store");
        }
        json ps = json::array();
        for (const auto& p : pairs) ps.push_back(json::array({p.first, p.second}));
        images.push_back(json{{"image", image}, {"certifies", ps}});
    }

    return json{{"objects", objects},
                {"images", images},
                {"image_count", static_cast<int>(by_image.size())}};
}

std::size_t full_graph_prompt_chars(const SceneGraph& graph) {
    json objects = json::array();
    for (const auto& [id, node] : graph.objects()) {
        objects.push_back(json{{"id", id},
                               {"category", node.category},
                               {"position",
                                json::array({node.position.x, node.position.y, node.position.z})},
                               {"room", node.room}});
    }
    json edges = json::array();
    for (const auto& [pair, images] : graph.edge_store().edges()) {
        json imgs = json::array();
        for (const auto& img : images) imgs.push_back(img);
        edges.push_back(json{{"pair", json::array({pair.first, pair.second})}, {"images", imgs}});
    }
    return json{{"objects", objects}, {"edges", edges}}.dump().size();
}

}  // namespace msgnav
