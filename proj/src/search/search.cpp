#include "vforest/search.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <cmath>

namespace vforest {

void SearchOptions::validate() const {
    if (!(tau_rel >= 0.0 && tau_rel <= 1.0)) {
        throw Error(ErrorCode::validation, "tau_rel must lie in [0, 1]");
    }
    if (max_depth && *max_depth < 0) {
        throw Error(ErrorCode::validation, "max_depth must be >= 0");
    }
}

double cosine_relevance(std::span<const double> query, const TreeNode& node) {
    if (query.size() != node.content.size()) {
        throw Error(ErrorCode::validation, "query dimension " + std::to_string(query.size()) +
                                               " differs from node content dimension " +
                                               std::to_string(node.content.size()));
    }
    double dot = 0.0, qq = 0.0, cc = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        dot += query[i] * node.content[i];
        qq += query[i] * query[i];
        cc += node.content[i] * node.content[i];
    }
    if (qq == 0.0 || cc == 0.0) {
        return 0.5;
    }
    double cos = dot / std::sqrt(qq * cc);
    return std::clamp((1.0 + cos) / 2.0, 0.0, 1.0);
}

namespace {

struct Candidate {
    NodeId node;
    double relevance;
};

struct Outcome {
    std::vector<SearchHit> hits;
    std::optional<Candidate> best;  // set only when the subtree produced no hit
};

class Searcher {
public:
    Searcher(std::span<const double> query, const IdentitySet& required, const VideoTree& tree,
             const RelevanceFn& relevance, const SearchOptions& opts, SearchResult& result)
        : query_(query), required_(required), tree_(tree), relevance_(relevance), opts_(opts), result_(result) {}

    Outcome visit(NodeId id) {
        const TreeNode& node = tree_.node(id);
        if (opts_.use_reid && !required_.empty() && !node.contains_all(required_)) {
            return {};
        }
        double r = relevance_(query_, node);
        ++result_.relevance_evaluations;
        if (opts_.trace) {
            result_.trace.push_back({tree_.meta.video_id, id, node.depth, r});
        }
        if (r >= opts_.tau_rel) {
            return {{hit(id, r, false)}, std::nullopt};
        }
        bool terminal = node.is_leaf() || (opts_.max_depth && node.depth >= *opts_.max_depth);
        if (terminal) {
            if (opts_.leaf_fallback) {
                return {{}, Candidate{id, r}};
            }
            return {};
        }

        std::vector<Outcome> parts;
        parts.reserve(node.children.size());
        bool any_hit = false;
        for (NodeId c : node.children) {
            parts.push_back(visit(c));
            any_hit = any_hit || !parts.back().hits.empty();
        }
        Outcome out;
        if (!any_hit) {
            for (const auto& p : parts) {
                if (p.best && (!out.best || p.best->relevance > out.best->relevance)) {
                    out.best = p.best;
                }
            }
            return out;
        }
        for (auto& p : parts) {
            if (!p.hits.empty()) {
                std::move(p.hits.begin(), p.hits.end(), std::back_inserter(out.hits));
            } else if (p.best) {
                out.hits.push_back(hit(p.best->node, p.best->relevance, true));
            }
        }
        return out;
    }

    SearchHit hit(NodeId id, double relevance, bool fallback) const {
        const TreeNode& n = tree_.node(id);
        return {tree_.meta.video_id, id, relevance, fallback, n.depth, n.t_start, n.t_end, n.text, n.content};
    }

private:
    std::span<const double> query_;
    const IdentitySet& required_;
    const VideoTree& tree_;
    const RelevanceFn& relevance_;
    const SearchOptions& opts_;
    SearchResult& result_;
};

} // namespace

SearchResult search(std::span<const double> query_vector, const IdentitySet& required_identities,
                    const VideoTree& tree, const RelevanceFn& relevance, const SearchOptions& options) {
    options.validate();
    SearchResult result;
    if (tree.nodes.empty()) {
        return result;
    }
    Searcher searcher(query_vector, required_identities, tree, relevance, options, result);
    Outcome top = searcher.visit(tree.root);
    result.hits = std::move(top.hits);
    if (result.hits.empty() && top.best) {
        result.hits.push_back(searcher.hit(top.best->node, top.best->relevance, true));
    }
    return result;
}

std::vector<NodeId> visited_nodes(const SearchResult& result) {
    std::vector<NodeId> out;
    out.reserve(result.trace.size());
    for (const auto& t : result.trace) {
        out.push_back(t.node);
    }
    return out;
}

} // namespace vforest
