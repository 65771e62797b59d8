#include "vforest/encoding.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace vforest {

Embedding Provider::embed_text(std::string_view text) {
    ++calls_;
    return do_embed_text(text);
}

SegmentEncoding Provider::encode_segment(const SegmentInput& input) {
    ++calls_;
    return do_encode_segment(input);
}

std::string Provider::caption(const SegmentInput& input) {
    ++calls_;
    return do_caption(input);
}

nlohmann::json Provider::parse_query(std::string_view text) {
    ++calls_;
    return do_parse_query(text);
}

std::string Provider::synthesize(std::string_view task, std::span<const std::string> evidence) {
    ++calls_;
    return do_synthesize(task, evidence);
}

std::size_t keyframe_of(const Segment& segment) noexcept {
    return (segment.start_index + segment.end_index) / 2;
}

std::vector<PersonDetection> aggregate_detections(const Segment& segment, const DetectionIndex& detections) {
    auto span = detections.range(segment.start_index, segment.end_index);
    return {span.begin(), span.end()};
}

namespace {

std::string segment_label(const Segment& s) {
    return s.video_id + "[" + std::to_string(s.start_index) + "-" + std::to_string(s.end_index) + "]";
}

SegmentEncoding encode_one(const Segment& segment, std::span<const FrameFeature> frames,
                           const DetectionIndex& detections, Provider& provider) {
    std::size_t key = keyframe_of(segment);
    if (segment.end_index >= frames.size() || segment.start_index > segment.end_index) {
        throw Error(ErrorCode::validation, "segment " + segment_label(segment) + " is outside the frame list");
    }
    const FrameFeature& keyframe = frames[key];
    if (keyframe.embedding.size() != provider.dim()) {
        throw Error(ErrorCode::validation, "dimension mismatch: corpus d=" + std::to_string(keyframe.embedding.size()) +
                                               ", provider d=" + std::to_string(provider.dim()));
    }
    std::vector<PersonDetection> dets = aggregate_detections(segment, detections);
    SegmentEncoding enc;
    try {
        enc = provider.encode_segment(SegmentInput{segment, keyframe.embedding, dets});
    } catch (const ProviderError& e) {
        throw ProviderError(e.rpc_code(), "segment " + segment_label(segment) + ": " + e.what());
    }
    if (enc.content.size() != provider.dim()) {
        throw Error(ErrorCode::validation, "segment " + segment_label(segment) + ": provider returned dimension " +
                                               std::to_string(enc.content.size()));
    }
    enc.segment = segment;
    return enc;
}

} // namespace

std::vector<SegmentEncoding> encode_all(std::span<const Segment> segments,
                                        std::span<const FrameFeature> frames,
                                        const DetectionIndex& detections, Provider& provider,
                                        std::size_t max_concurrency) {
    std::vector<SegmentEncoding> out(segments.size());
    std::size_t workers = std::min<std::size_t>(max_concurrency, segments.size());
    if (provider.serial() || workers <= 1) {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            out[i] = encode_one(segments[i], frames, detections, provider);
        }
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = segments.size();
    std::exception_ptr error;
    auto work = [&] {
        for (std::size_t i = next++; i < segments.size(); i = next++) {
            try {
                out[i] = encode_one(segments[i], frames, detections, provider);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                // keep the lowest failing index
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(work);
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

} // namespace vforest
