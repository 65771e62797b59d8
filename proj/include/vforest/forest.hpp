#pragma once

// Per-video hierarchical trees over segments.  Node intervals are half-open
// [t_start, t_end) and are kept alongside the exact frame range they came
// from, so coverage checks never depend on floating point.

#include "vforest/model.hpp"
#include "vforest/provider.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vforest {

using NodeId = std::uint32_t;

struct TrajectorySample {
    double t = 0.0;
    Position position;

    bool operator==(const TrajectorySample&) const = default;
};

inline constexpr std::size_t max_trajectory_samples = 8;

struct TrajectoryDescriptor {
    Identity identity;
    double first_ts = 0.0;
    double last_ts = 0.0;
    std::size_t observation_count = 0;
    Position mean_position;
    std::vector<TrajectorySample> samples;  // evenly spaced, sorted by t

    bool operator==(const TrajectoryDescriptor&) const = default;
};

using ReidSummary = std::map<Identity, TrajectoryDescriptor>;

// Builds a leaf descriptor from time-ordered observations of one identity.
TrajectoryDescriptor describe_trajectory(const Identity& identity, std::span<const TrajectorySample> observations);
TrajectoryDescriptor merge_descriptors(const TrajectoryDescriptor& a, const TrajectoryDescriptor& b);

struct TreeNode {
    NodeId id = 0;
    std::size_t frame_start = 0;  // inclusive
    std::size_t frame_end = 0;    // exclusive
    double t_start = 0.0;
    double t_end = 0.0;
    ReidSummary reid_summary;
    Embedding content;
    std::optional<std::string> text;
    std::vector<NodeId> children;  // ordered by t_start
    int depth = 0;
    std::optional<Segment> segment;  // present iff leaf

    bool is_leaf() const noexcept { return children.empty(); }
    IdentitySet identities() const;
    bool contains_all(const IdentitySet& ids) const;
    bool operator==(const TreeNode&) const = default;
};

struct VideoTree {
    VideoMeta meta;
    NodeId root = 0;
    std::vector<TreeNode> nodes;  // indexed by NodeId, depth-first preorder
    std::size_t leaf_count = 0;
    std::size_t fanout = 4;

    const TreeNode& node(NodeId id) const { return nodes.at(id); }
    std::vector<NodeId> leaves() const;
    int height() const;
    bool operator==(const VideoTree&) const = default;
};

inline constexpr std::size_t default_fanout = 4;

VideoTree build_tree(std::span<const Segment> segments, std::span<const SegmentEncoding> encodings,
                     const DetectionIndex& detections, const VideoMeta& meta,
                     std::size_t fanout = default_fanout);

enum class ViolationKind {
    interval,     // empty or inverted node interval
    coverage,     // children leave a gap or miss the parent's endpoints
    disjointness, // children overlap
    ordering,     // children not in temporal order
    reid_union,   // identity set differs from the union of the children
    descriptor,   // malformed trajectory descriptor
    shape,        // leaf/segment mismatch, bad ids, unreachable or shared nodes
    depth,        // wrong depth labels or depth bound exceeded
    root,         // root does not span the whole video
};

const char* to_string(ViolationKind kind) noexcept;

struct Violation {
    ViolationKind kind;
    NodeId node;
    std::string message;
};

std::vector<Violation> validate_tree(const VideoTree& tree);

} // namespace vforest
