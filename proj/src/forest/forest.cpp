#include "vforest/forest.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>

namespace vforest {

namespace {

std::vector<TrajectorySample> resample(std::vector<TrajectorySample> samples) {
    std::size_t n = samples.size();
    if (n <= max_trajectory_samples) {
        return samples;
    }
    std::vector<TrajectorySample> out;
    out.reserve(max_trajectory_samples);
    const std::size_t last = max_trajectory_samples - 1;
    for (std::size_t k = 0; k <= last; ++k) {
        // round(k * (n - 1) / last)
        std::size_t idx = (2 * k * (n - 1) + last) / (2 * last);
        out.push_back(samples[idx]);
    }
    return out;
}

Embedding normalized_mean(const std::vector<const Embedding*>& parts) {
    Embedding mean(parts.front()->size(), 0.0);
    for (const Embedding* p : parts) {
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += (*p)[i];
        }
    }
    double norm2 = 0.0;
    for (double& x : mean) {
        x /= static_cast<double>(parts.size());
        norm2 += x * x;
    }
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : mean) {
            x *= inv;
        }
    }
    return mean;
}

// Smallest k with fanout^k >= leaves.
int ceil_log(std::size_t leaves, std::size_t fanout) {
    int k = 0;
    std::size_t reach = 1;
    while (reach < leaves) {
        reach *= fanout;
        ++k;
    }
    return k;
}

} // namespace

IdentitySet TreeNode::identities() const {
    IdentitySet ids;
    for (const auto& [id, _] : reid_summary) {
        ids.insert(id);
    }
    return ids;
}

bool TreeNode::contains_all(const IdentitySet& ids) const {
    return std::all_of(ids.begin(), ids.end(), [&](const Identity& id) { return reid_summary.count(id) > 0; });
}

std::vector<NodeId> VideoTree::leaves() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes) {
        if (n.is_leaf()) {
            out.push_back(n.id);
        }
    }
    return out;
}

int VideoTree::height() const {
    int h = 0;
    for (const auto& n : nodes) {
        h = std::max(h, n.depth);
    }
    return h;
}

TrajectoryDescriptor describe_trajectory(const Identity& identity, std::span<const TrajectorySample> observations) {
    if (observations.empty()) {
        throw Error(ErrorCode::invalid_argument, "trajectory of \"" + identity + "\" has no observations");
    }
    TrajectoryDescriptor d;
    d.identity = identity;
    d.first_ts = observations.front().t;
    d.last_ts = observations.back().t;
    d.observation_count = observations.size();
    double sx = 0.0, sy = 0.0;
    for (const auto& o : observations) {
        sx += o.position.x;
        sy += o.position.y;
        d.first_ts = std::min(d.first_ts, o.t);
        d.last_ts = std::max(d.last_ts, o.t);
    }
    d.mean_position = {sx / static_cast<double>(observations.size()), sy / static_cast<double>(observations.size())};
    d.samples = resample({observations.begin(), observations.end()});
    return d;
}

TrajectoryDescriptor merge_descriptors(const TrajectoryDescriptor& a, const TrajectoryDescriptor& b) {
    TrajectoryDescriptor m;
    m.identity = a.identity;
    m.first_ts = std::min(a.first_ts, b.first_ts);
    m.last_ts = std::max(a.last_ts, b.last_ts);
    m.observation_count = a.observation_count + b.observation_count;
    double wa = static_cast<double>(a.observation_count);
    double wb = static_cast<double>(b.observation_count);
    m.mean_position = {(a.mean_position.x * wa + b.mean_position.x * wb) / (wa + wb),
                       (a.mean_position.y * wa + b.mean_position.y * wb) / (wa + wb)};
    std::vector<TrajectorySample> all;
    all.reserve(a.samples.size() + b.samples.size());
    std::merge(a.samples.begin(), a.samples.end(), b.samples.begin(), b.samples.end(), std::back_inserter(all),
               [](const TrajectorySample& x, const TrajectorySample& y) { return x.t < y.t; });
    m.samples = resample(std::move(all));
    return m;
}

VideoTree build_tree(std::span<const Segment> segments, std::span<const SegmentEncoding> encodings,
                     const DetectionIndex& detections, const VideoMeta& meta, std::size_t fanout) {
    if (segments.empty()) {
        throw Error(ErrorCode::validation, "cannot build a tree from an empty segment list");
    }
    if (fanout < 2) {
        throw Error(ErrorCode::validation, "fanout must be >= 2");
    }
    if (encodings.size() != segments.size()) {
        throw Error(ErrorCode::validation, "expected one encoding per segment");
    }
    std::size_t expected_start = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (s.start_index != expected_start || s.end_index < s.start_index) {
            throw Error(ErrorCode::validation, "segments of " + meta.video_id + " are not contiguous at index " +
                                                   std::to_string(i));
        }
        if (encodings[i].segment.start_index != s.start_index || encodings[i].segment.end_index != s.end_index) {
            throw Error(ErrorCode::validation, "encoding " + std::to_string(i) + " does not match its segment");
        }
        expected_start = s.end_index + 1;
    }
    if (expected_start != meta.frame_count) {
        throw Error(ErrorCode::validation, "segments of " + meta.video_id + " do not cover all " +
                                               std::to_string(meta.frame_count) + " frames");
    }

    // Bottom-up grouping over a scratch store, renumbered in preorder below.
    std::vector<TreeNode> scratch;
    std::vector<std::size_t> level;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        TreeNode leaf;
        leaf.frame_start = s.start_index;
        leaf.frame_end = s.end_index + 1;
        leaf.content = encodings[i].content;
        leaf.text = encodings[i].summary_text;
        leaf.segment = s;
        std::map<Identity, std::vector<TrajectorySample>> tracks;
        for (const auto& d : detections.range(s.start_index, s.end_index)) {
            tracks[d.identity].push_back({d.timestamp, d.position});
        }
        for (const auto& [id, obs] : tracks) {
            leaf.reid_summary.emplace(id, describe_trajectory(id, obs));
        }
        level.push_back(scratch.size());
        scratch.push_back(std::move(leaf));
    }
    while (level.size() > 1) {
        std::vector<std::size_t> next;
        for (std::size_t g = 0; g < level.size(); g += fanout) {
            std::size_t end = std::min(level.size(), g + fanout);
            TreeNode parent;
            std::vector<const Embedding*> parts;
            for (std::size_t c = g; c < end; ++c) {
                const TreeNode& child = scratch[level[c]];
                parent.children.push_back(static_cast<NodeId>(level[c]));
                parts.push_back(&child.content);
                for (const auto& [id, desc] : child.reid_summary) {
                    auto [it, inserted] = parent.reid_summary.emplace(id, desc);
                    if (!inserted) {
                        it->second = merge_descriptors(it->second, desc);
                    }
                }
            }
            parent.frame_start = scratch[level[g]].frame_start;
            parent.frame_end = scratch[level[end - 1]].frame_end;
            parent.content = normalized_mean(parts);
            next.push_back(scratch.size());
            scratch.push_back(std::move(parent));
        }
        level = std::move(next);
    }

    VideoTree tree;
    tree.meta = meta;
    tree.fanout = fanout;
    tree.leaf_count = segments.size();
    tree.nodes.reserve(scratch.size());
    std::function<NodeId(std::size_t, int)> emit = [&](std::size_t index, int depth) -> NodeId {
        NodeId id = static_cast<NodeId>(tree.nodes.size());
        tree.nodes.push_back(std::move(scratch[index]));
        TreeNode& n = tree.nodes.back();
        n.id = id;
        n.depth = depth;
        n.t_start = static_cast<double>(n.frame_start) / meta.fps;
        n.t_end = static_cast<double>(n.frame_end) / meta.fps;
        std::vector<NodeId> old_children = std::move(n.children);
        std::vector<NodeId> new_children;
        for (NodeId c : old_children) {
            new_children.push_back(emit(c, depth + 1));
        }
        tree.nodes[id].children = std::move(new_children);
        return id;
    };
    tree.root = emit(level.front(), 0);
    return tree;
}

const char* to_string(ViolationKind kind) noexcept {
    switch (kind) {
    case ViolationKind::interval: return "interval";
    case ViolationKind::coverage: return "coverage";
    case ViolationKind::disjointness: return "disjointness";
    case ViolationKind::ordering: return "ordering";
    case ViolationKind::reid_union: return "reid_union";
    case ViolationKind::descriptor: return "descriptor";
    case ViolationKind::shape: return "shape";
    case ViolationKind::depth: return "depth";
    case ViolationKind::root: return "root";
    }
    return "unknown";
}

std::vector<Violation> validate_tree(const VideoTree& tree) {
    std::vector<Violation> out;
    auto report = [&](ViolationKind k, NodeId id, std::string msg) {
        out.push_back({k, id, "node " + std::to_string(id) + ": " + std::move(msg)});
    };
    const auto n_nodes = tree.nodes.size();
    if (n_nodes == 0 || tree.root >= n_nodes) {
        out.push_back({ViolationKind::shape, tree.root, "tree has no valid root"});
        return out;
    }
    const double fps = tree.meta.fps;
    const TreeNode& root = tree.nodes[tree.root];
    if (root.frame_start != 0 || root.frame_end != tree.meta.frame_count) {
        report(ViolationKind::root, root.id, "root does not span [0, frame_count)");
    }
    if (root.depth != 0) {
        report(ViolationKind::depth, root.id, "root depth is not 0");
    }

    std::vector<int> seen(n_nodes, 0);
    std::vector<NodeId> stack{tree.root};
    std::size_t leaves = 0;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (seen[id]++) {
            report(ViolationKind::shape, id, "reachable more than once");
            continue;
        }
        const TreeNode& n = tree.nodes[id];
        if (n.id != id) {
            report(ViolationKind::shape, id, "stored id does not match its position");
        }
        if (n.frame_start >= n.frame_end || !(n.t_start < n.t_end)) {
            report(ViolationKind::interval, id, "empty or inverted interval");
        }
        if (std::abs(n.t_start - static_cast<double>(n.frame_start) / fps) > 1e-9 ||
            std::abs(n.t_end - static_cast<double>(n.frame_end) / fps) > 1e-9) {
            report(ViolationKind::interval, id, "seconds disagree with frame range");
        }
        for (const auto& [ident, d] : n.reid_summary) {
            bool ok = d.identity == ident && d.first_ts <= d.last_ts && d.observation_count >= 1 &&
                      d.samples.size() <= max_trajectory_samples && !d.samples.empty() &&
                      std::all_of(d.samples.begin(), d.samples.end(), [&](const TrajectorySample& s) {
                          return s.t >= d.first_ts && s.t <= d.last_ts;
                      });
            if (!ok) {
                report(ViolationKind::descriptor, id, "malformed descriptor for \"" + ident + "\"");
            }
        }

        if (n.is_leaf()) {
            ++leaves;
            if (!n.segment) {
                report(ViolationKind::shape, id, "leaf without segment reference");
            } else if (n.segment->start_index != n.frame_start || n.segment->end_index + 1 != n.frame_end) {
                report(ViolationKind::shape, id, "leaf range differs from its segment");
            }
            continue;
        }
        if (n.segment) {
            report(ViolationKind::shape, id, "internal node carries a segment reference");
        }

        bool children_ok = true;
        for (NodeId c : n.children) {
            if (c >= n_nodes) {
                report(ViolationKind::shape, id, "child id " + std::to_string(c) + " out of range");
                children_ok = false;
            }
        }
        if (!children_ok) {
            continue;
        }
        std::vector<const TreeNode*> kids;
        for (NodeId c : n.children) {
            kids.push_back(&tree.nodes[c]);
            if (tree.nodes[c].depth != n.depth + 1) {
                report(ViolationKind::depth, c, "depth is not parent depth + 1");
            }
        }
        for (std::size_t i = 1; i < kids.size(); ++i) {
            if (!(kids[i - 1]->frame_start < kids[i]->frame_start)) {
                report(ViolationKind::ordering, id, "children not ordered by start time");
                break;
            }
        }
        auto sorted = kids;
        std::sort(sorted.begin(), sorted.end(),
                  [](const TreeNode* a, const TreeNode* b) { return a->frame_start < b->frame_start; });
        bool gap = sorted.front()->frame_start != n.frame_start || sorted.back()->frame_end != n.frame_end;
        bool overlap = false;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i]->frame_start > sorted[i - 1]->frame_end) {
                gap = true;
            } else if (sorted[i]->frame_start < sorted[i - 1]->frame_end) {
                overlap = true;
            }
        }
        if (gap) {
            report(ViolationKind::coverage, id, "children do not cover the interval");
        }
        if (overlap) {
            report(ViolationKind::disjointness, id, "children intervals overlap");
        }

        IdentitySet unioned;
        for (const TreeNode* k : kids) {
            for (const auto& [ident, _] : k->reid_summary) {
                unioned.insert(ident);
            }
        }
        if (unioned != n.identities()) {
            report(ViolationKind::reid_union, id, "identity set differs from the union of its children");
        }
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
            stack.push_back(*it);
        }
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!seen[i]) {
            report(ViolationKind::shape, static_cast<NodeId>(i), "unreachable from the root");
        }
    }
    if (leaves != tree.leaf_count) {
        report(ViolationKind::shape, tree.root, "leaf_count disagrees with the tree");
    }
    if (tree.fanout >= 2 && tree.height() > ceil_log(std::max<std::size_t>(leaves, 1), tree.fanout) + 1) {
        report(ViolationKind::depth, tree.root, "height exceeds ceil(log_fanout(leaves)) + 1");
    }
    return out;
}

} // namespace vforest
