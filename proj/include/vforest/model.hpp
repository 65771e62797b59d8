#pragma once

// Feature-stream data model: one video's metadata, per-frame embeddings and
// person detections, plus the line-delimited JSON document they travel in.

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vforest {

// Opaque person token as emitted by an upstream ReID tracker.
using Identity = std::string;
using IdentitySet = std::set<Identity>;
using Embedding = std::vector<double>;

struct Date {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;

    // Strict ISO-8601 calendar date, YYYY-MM-DD.
    static Date parse(std::string_view text);
    static std::optional<Date> try_parse(std::string_view text) noexcept;
    std::string to_string() const;

    auto operator<=>(const Date&) const = default;
};

struct DateRange {
    Date from;
    Date to;  // inclusive

    bool contains(const Date& d) const noexcept { return from <= d && d <= to; }
    bool operator==(const DateRange&) const = default;
};

struct VideoMeta {
    std::string video_id;
    std::string location;
    Date date;
    double fps = 1.0;
    std::size_t frame_count = 0;
    std::size_t dim = 0;

    bool operator==(const VideoMeta&) const = default;
};

struct FrameFeature {
    std::string video_id;
    std::size_t frame_index = 0;
    double timestamp = 0.0;
    Embedding embedding;

    bool operator==(const FrameFeature&) const = default;
};

struct Position {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Position&) const = default;
};

struct PersonDetection {
    std::string video_id;
    std::size_t frame_index = 0;
    double timestamp = 0.0;
    Position position;
    Identity identity;

    bool operator==(const PersonDetection&) const = default;
};

// Inclusive frame range [start_index, end_index] of one video.
struct Segment {
    std::string video_id;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    std::size_t keyframe_index = 0;

    std::size_t length() const noexcept { return end_index - start_index + 1; }
    bool operator==(const Segment&) const = default;
};

// Per-frame lookup of detections; frames without detections map to an
// empty range.
class DetectionIndex {
public:
    DetectionIndex() = default;
    DetectionIndex(std::span<const PersonDetection> sorted_detections, std::size_t frame_count);

    std::span<const PersonDetection> at(std::size_t frame_index) const noexcept;
    std::span<const PersonDetection> range(std::size_t first_frame, std::size_t last_frame) const noexcept;
    std::size_t frame_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

private:
    std::span<const PersonDetection> detections_;
    std::vector<std::size_t> offsets_;
};

struct VideoStream {
    VideoMeta meta;
    std::vector<FrameFeature> frames;          // frame_index == position
    std::vector<PersonDetection> detections;   // sorted by (frame_index, identity)

    DetectionIndex detection_index() const {
        return DetectionIndex(detections, frames.size());
    }
    bool operator==(const VideoStream&) const = default;
};

// Timestamp tolerance when a frame record carries its own "t".
inline constexpr double timestamp_tolerance = 1e-6;

VideoStream ingest_stream(std::istream& in);
VideoStream ingest_stream_text(std::string_view text);
VideoStream ingest_stream_file(const std::string& path);

// Canonical document: meta line, then each frame followed by its detections.
void write_stream(const VideoStream& stream, std::ostream& out);
std::string write_stream_text(const VideoStream& stream);

// Identities detected at the frame; empty when the frame has no detections
// or lies outside the index.
IdentitySet identity_set(const FrameFeature& frame, const DetectionIndex& detections);
IdentitySet identity_set(std::size_t frame_index, const DetectionIndex& detections);

} // namespace vforest
