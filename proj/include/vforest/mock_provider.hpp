#pragma once

#include "vforest/provider.hpp"

#include <cstdint>
#include <string_view>

namespace vforest {

// Deterministic offline provider.
//
// Every vector it returns is a hash embedding: the FNV-1a 64-bit hash of a
// canonical byte string, xor-ed with the provider seed, seeds an
// std::mt19937_64; each coordinate is sqrt(-2 ln(1 - u1)) cos(2 pi u2) for two
// 53-bit uniforms u = (draw >> 11) * 2^-53, and the result is scaled to unit
// length.
//
// Canonical bytes:
//   - segments: each keyframe coordinate as its IEEE-754 bit pattern,
//     8 bytes little-endian, then for every distinct identity in sorted
//     order a 0x1F separator followed by the token bytes;
//   - text: "text:" followed by the text bytes.
//
// Captions follow the template "persons {ids} present, frames {a}-{b}"
// with ids comma-joined in sorted order ("none" when empty).
class MockProvider final : public Provider {
public:
    explicit MockProvider(std::size_t dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

    std::size_t dim() const override { return dim_; }

    static Embedding hash_embedding(std::string_view bytes, std::size_t dim, std::uint64_t seed);
    static std::string segment_bytes(std::span<const double> keyframe, std::span<const PersonDetection> detections);

protected:
    Embedding do_embed_text(std::string_view text) override;
    SegmentEncoding do_encode_segment(const SegmentInput& input) override;
    std::string do_caption(const SegmentInput& input) override;
    nlohmann::json do_parse_query(std::string_view text) override;
    std::string do_synthesize(std::string_view task, std::span<const std::string> evidence) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Constrained natural-language grammar understood by the mock:
//   who appeared in <locs> [on <dates>]            -> common_identity
//   was <id> [present] in <locs> [on <dates>]      -> presence
//   when was <id> in <locs> [on <dates>]           -> locate
//   how many people were in <locs> [on <dates>]    -> count
//   summarize <locs> [on <dates>]                  -> summarize
// <locs>  := L | L and L | L, L and L ...
// <dates> := D | D to D | D and D        (D is YYYY-MM-DD)
// Throws Error(parse) for anything else.
nlohmann::json mock_parse_query(std::string_view text);

} // namespace vforest
