#pragma once

// Provider contract: the embedding, captioning, query-parsing and synthesis
// back end.  The engine ships a deterministic mock; real models sit behind
// the line-delimited JSON RPC client in rpc.hpp.

#include "vforest/model.hpp"

#include <json.hpp>

#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace vforest {

struct SegmentEncoding {
    Segment segment;
    Embedding content;
    std::optional<std::string> summary_text;

    bool operator==(const SegmentEncoding&) const = default;
};

// Everything a provider sees about one segment: the keyframe embedding and
// the detections aggregated over the segment's frame range.
struct SegmentInput {
    const Segment& segment;
    std::span<const double> keyframe_embedding;
    std::span<const PersonDetection> detections;
};

class Provider {
public:
    virtual ~Provider() = default;

    virtual std::size_t dim() const = 0;
    // True when the provider cannot take concurrent requests.
    virtual bool serial() const { return false; }

    Embedding embed_text(std::string_view text);
    SegmentEncoding encode_segment(const SegmentInput& input);
    std::string caption(const SegmentInput& input);
    // Returns a structured query document (same schema as `query --file`).
    nlohmann::json parse_query(std::string_view text);
    std::string synthesize(std::string_view task, std::span<const std::string> evidence);

    std::size_t call_count() const noexcept { return calls_.load(); }

protected:
    virtual Embedding do_embed_text(std::string_view text) = 0;
    virtual SegmentEncoding do_encode_segment(const SegmentInput& input) = 0;
    virtual std::string do_caption(const SegmentInput& input) = 0;
    virtual nlohmann::json do_parse_query(std::string_view text) = 0;
    virtual std::string do_synthesize(std::string_view task, std::span<const std::string> evidence) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

} // namespace vforest
