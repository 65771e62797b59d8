#pragma once

#include "vforest/model.hpp"
#include "vforest/provider.hpp"

#include <span>
#include <vector>

namespace vforest {

// Temporally central frame: floor((start + end) / 2).
std::size_t keyframe_of(const Segment& segment) noexcept;

// Detections inside the segment's frame range, ordered by (frame, identity).
std::vector<PersonDetection> aggregate_detections(const Segment& segment, const DetectionIndex& detections);

// One encoding per segment, in segment order.  Provider calls fan out over
// up to max_concurrency threads unless the provider declares itself serial.
std::vector<SegmentEncoding> encode_all(std::span<const Segment> segments,
                                        std::span<const FrameFeature> frames,
                                        const DetectionIndex& detections, Provider& provider,
                                        std::size_t max_concurrency = 1);

} // namespace vforest
