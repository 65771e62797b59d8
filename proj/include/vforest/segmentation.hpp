#pragma once

#include "vforest/model.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace vforest {

// Resolved thresholds used by the boundary test.
struct SegmenterConfig {
    double eps1 = std::numeric_limits<double>::infinity();  // local transition
    double eps2 = std::numeric_limits<double>::infinity();  // drift from segment centroid
    std::size_t delta_p = 1;                                // person-set change

    void validate() const;
};

// User-facing settings.  Unset thresholds are auto-calibrated from the
// stream when auto_calibrate is on, and disabled (+inf) otherwise.
struct SegmenterSettings {
    std::optional<double> eps1;
    std::optional<double> eps2;
    std::size_t delta_p = 1;
    bool auto_calibrate = true;

    SegmenterConfig resolve(std::span<const FrameFeature> frames) const;
};

// mean + 2 * stddev (population) of consecutive-frame L2 distances.
// +inf for streams with fewer than two frames.
double calibrate_threshold(std::span<const FrameFeature> frames);

// Running mean of the embeddings in the open segment.
class SegmentCentroid {
public:
    explicit SegmentCentroid(std::span<const double> first);

    void add(std::span<const double> embedding);
    void reset(std::span<const double> first);

    const Embedding& mean() const noexcept { return mean_; }
    std::size_t count() const noexcept { return count_; }

private:
    Embedding mean_;
    std::size_t count_ = 0;
};

enum class Criterion : std::uint8_t {
    local_transition = 1 << 0,
    global_deviation = 1 << 1,
    person_set_change = 1 << 2,
};

struct BoundaryDecision {
    bool is_boundary = false;
    std::uint8_t fired = 0;

    bool has(Criterion c) const noexcept { return (fired & static_cast<std::uint8_t>(c)) != 0; }
    bool operator==(const BoundaryDecision&) const = default;
};

BoundaryDecision boundary_decision(const FrameFeature& prev, const FrameFeature& curr,
                                   const SegmentCentroid& centroid, const IdentitySet& prev_ids,
                                   const IdentitySet& curr_ids, const SegmenterConfig& cfg);

std::vector<Segment> segment_video(std::span<const FrameFeature> frames,
                                   const DetectionIndex& detections, const SegmenterConfig& cfg);

} // namespace vforest
