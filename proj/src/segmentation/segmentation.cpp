#include "vforest/segmentation.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace vforest {

namespace {

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::validation, "embedding dimension mismatch: " + std::to_string(a.size()) +
                                               " vs " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::size_t symmetric_difference_size(const IdentitySet& a, const IdentitySet& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++n;
            ++ia;
        } else if (*ib < *ia) {
            ++n;
            ++ib;
        } else {
            ++ia;
            ++ib;
        }
    }
    return n + static_cast<std::size_t>(std::distance(ia, a.end())) +
           static_cast<std::size_t>(std::distance(ib, b.end()));
}

} // namespace

void SegmenterConfig::validate() const {
    if (std::isnan(eps1) || eps1 < 0.0 || std::isnan(eps2) || eps2 < 0.0) {
        throw Error(ErrorCode::validation, "segmenter thresholds eps1/eps2 must be >= 0");
    }
    if (delta_p < 1) {
        throw Error(ErrorCode::validation, "segmenter delta_p must be >= 1");
    }
}

double calibrate_threshold(std::span<const FrameFeature> frames) {
    if (frames.size() < 2) {
        return std::numeric_limits<double>::infinity();
    }
    std::vector<double> dists;
    dists.reserve(frames.size() - 1);
    for (std::size_t j = 1; j < frames.size(); ++j) {
        dists.push_back(l2_distance(frames[j - 1].embedding, frames[j].embedding));
    }
    double mean = 0.0;
    for (double d : dists) {
        mean += d;
    }
    mean /= static_cast<double>(dists.size());
    double var = 0.0;
    for (double d : dists) {
        var += (d - mean) * (d - mean);
    }
    var /= static_cast<double>(dists.size());
    return mean + 2.0 * std::sqrt(var);
}

SegmenterConfig SegmenterSettings::resolve(std::span<const FrameFeature> frames) const {
    SegmenterConfig cfg;
    cfg.delta_p = delta_p;
    if ((!eps1 || !eps2) && auto_calibrate) {
        double calibrated = calibrate_threshold(frames);
        cfg.eps1 = eps1.value_or(calibrated);
        cfg.eps2 = eps2.value_or(calibrated);
    } else {
        cfg.eps1 = eps1.value_or(std::numeric_limits<double>::infinity());
        cfg.eps2 = eps2.value_or(std::numeric_limits<double>::infinity());
    }
    cfg.validate();
    return cfg;
}

SegmentCentroid::SegmentCentroid(std::span<const double> first) { reset(first); }

void SegmentCentroid::reset(std::span<const double> first) {
    mean_.assign(first.begin(), first.end());
    count_ = 1;
}

void SegmentCentroid::add(std::span<const double> embedding) {
    if (embedding.size() != mean_.size()) {
        throw Error(ErrorCode::validation, "embedding dimension mismatch in centroid update");
    }
    ++count_;
    double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        mean_[i] += (embedding[i] - mean_[i]) * inv;
    }
}

BoundaryDecision boundary_decision(const FrameFeature& prev, const FrameFeature& curr,
                                   const SegmentCentroid& centroid, const IdentitySet& prev_ids,
                                   const IdentitySet& curr_ids, const SegmenterConfig& cfg) {
    BoundaryDecision out;
    if (l2_distance(curr.embedding, prev.embedding) > cfg.eps1) {
        out.fired |= static_cast<std::uint8_t>(Criterion::local_transition);
    }
    if (l2_distance(curr.embedding, centroid.mean()) > cfg.eps2) {
        out.fired |= static_cast<std::uint8_t>(Criterion::global_deviation);
    }
    if (symmetric_difference_size(curr_ids, prev_ids) >= cfg.delta_p) {
        out.fired |= static_cast<std::uint8_t>(Criterion::person_set_change);
    }
    out.is_boundary = out.fired != 0;
    return out;
}

std::vector<Segment> segment_video(std::span<const FrameFeature> frames,
                                   const DetectionIndex& detections, const SegmenterConfig& cfg) {
    if (frames.empty()) {
        throw Error(ErrorCode::validation, "cannot segment an empty frame list");
    }
    cfg.validate();
    const std::string& video_id = frames.front().video_id;
    auto close = [&](std::size_t start, std::size_t end) {
        return Segment{video_id, start, end, (start + end) / 2};
    };

    std::vector<Segment> segments;
    SegmentCentroid centroid(frames.front().embedding);
    IdentitySet prev_ids = identity_set(frames.front(), detections);
    std::size_t start = 0;
    for (std::size_t j = 1; j < frames.size(); ++j) {
        IdentitySet curr_ids = identity_set(frames[j], detections);
        BoundaryDecision d = boundary_decision(frames[j - 1], frames[j], centroid, prev_ids, curr_ids, cfg);
        if (d.is_boundary) {
            segments.push_back(close(start, j - 1));
            start = j;
            centroid.reset(frames[j].embedding);
        } else {
            centroid.add(frames[j].embedding);
        }
        prev_ids = std::move(curr_ids);
    }
    segments.push_back(close(start, frames.size() - 1));
    return segments;
}

} // namespace vforest
