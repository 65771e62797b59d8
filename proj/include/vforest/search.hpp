#pragma once

// Threshold-gated top-down tree search.  A node whose relevance reaches
// tau_rel is emitted and its subtree is not explored further; otherwise the
// search descends into every child.  With use_reid and required identities,
// subtrees whose ReID summary lacks one of them are skipped unscored.

#include "vforest/forest.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vforest {

struct SearchOptions {
    double tau_rel = 0.85;
    bool use_reid = true;
    std::optional<int> max_depth;
    // Emits the best-scoring terminal node of every maximal subtree that
    // produced no hit.  Terminal means a leaf or a node at max_depth.
    bool leaf_fallback = false;
    bool trace = false;

    void validate() const;
};

// Maps (query vector, node) to a score in [0, 1].
using RelevanceFn = std::function<double(std::span<const double>, const TreeNode&)>;

// (1 + cos) / 2 between the query and the node content.
double cosine_relevance(std::span<const double> query, const TreeNode& node);

struct SearchHit {
    std::string video_id;
    NodeId node = 0;
    double relevance = 0.0;
    bool fallback = false;
    int depth = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::optional<std::string> text;
    Embedding content;

    bool operator==(const SearchHit&) const = default;
};

struct TraceEntry {
    std::string video_id;
    NodeId node = 0;
    int depth = 0;
    double relevance = 0.0;

    bool operator==(const TraceEntry&) const = default;
};

struct SearchResult {
    std::vector<SearchHit> hits;       // temporal order
    std::vector<TraceEntry> trace;     // scored nodes in visit order, when tracing
    std::size_t relevance_evaluations = 0;
};

SearchResult search(std::span<const double> query_vector, const IdentitySet& required_identities,
                    const VideoTree& tree, const RelevanceFn& relevance, const SearchOptions& options);

std::vector<NodeId> visited_nodes(const SearchResult& result);

} // namespace vforest
