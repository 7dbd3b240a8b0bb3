#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "msgnav/reasoning.hpp"
#include "msgnav/scene_graph.hpp"

namespace msgnav {

/// Id/category skeleton of the scene graph with an undirected adjacency
/// list; no image data. Cheap enough to show a reasoner whole.
struct CompactGraph {
    std::vector<std::pair<ObjectId, std::string>> nodes;  // sorted by id
    std::map<ObjectId, std::vector<ObjectId>> adjacency;  // neighbor lists sorted

    bool has_node(ObjectId id) const;
    nlohmann::json to_json() const;
};

CompactGraph compress(const SceneGraph& graph);

/// Target-relevant objects plus one covering image per relevant pair.
struct KeySubgraph {
    std::set<ObjectId> related;                 // focus output, subset of key_objects
    std::set<ObjectId> key_objects;             // related plus their edge neighbors
    std::map<IdPair, std::string> key_edges;    // pair -> covering image ref
    std::vector<std::string> selected_images;   // selection order

    std::set<std::string> distinct_images() const;
};

struct FocusDiagnostics {
    std::vector<ObjectId> discarded;  // ids returned by the reasoner but absent
    bool used_fallback = false;
};

/// Top-k goal-relevant object ids via the reasoner. Invalid ids are
/// discarded; if nothing valid remains, falls back to deterministic
/// category matching on the goal text (exact, then substring, by id).
std::set<ObjectId> focus(const CompactGraph& compact, const Goal& goal, Reasoner& reasoner,
                         int k, int step, FocusDiagnostics* diag = nullptr);

/// Standalone greedy set-cover core: covers `pairs` with images drawn from
/// `image_pairs` (image -> pairs it certifies), repeatedly taking the image
/// covering the most uncovered pairs. Ties break to the oldest frame, then
/// the smallest image ref. Throws IntegrityError if some pair is uncoverable.
struct CoverResult {
    std::map<IdPair, std::string> assignment;
    std::vector<std::string> selection_order;
};
CoverResult greedy_cover(const std::set<IdPair>& pairs,
                         const std::map<std::string, std::set<IdPair>>& image_pairs,
                         const std::map<std::string, std::int64_t>& frame_ids);

/// Algorithm: filter every pair with at least one related endpoint, then
/// greedily cover those pairs with the fewest edge images.
KeySubgraph greedy_prune(const SceneGraph& graph, const std::set<ObjectId>& related);

/// Reasoner payload for a key subgraph: object attributes plus each
/// selected image annotated with the pairs it certifies.
nlohmann::json assemble_key_prompt(const KeySubgraph& key, const SceneGraph& graph);

/// Character count of the naive alternative that serializes the whole
/// graph (all objects, all edges with full image lists) into the prompt.
/// Used for the token-cost reduction statistic.
std::size_t full_graph_prompt_chars(const SceneGraph& graph);

}  // namespace msgnav
