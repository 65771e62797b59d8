#include "support.hpp"

#include "vforest/error.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

using namespace vforest;

namespace {

// Mock hash embedding recomputed from its documented definition.
Embedding reference_hash_embedding(const std::string& bytes, std::size_t dim, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h = (h ^ c) * 0x100000001b3ull;
    }
    std::mt19937_64 rng(h ^ seed);
    Embedding v(dim);
    double n2 = 0.0;
    for (auto& x : v) {
        double u1 = std::ldexp(static_cast<double>(rng() >> 11), -53);
        double u2 = std::ldexp(static_cast<double>(rng() >> 11), -53);
        x = std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
        n2 += x * x;
    }
    for (auto& x : v) {
        x /= std::sqrt(n2);
    }
    return v;
}

std::string reference_segment_bytes(const Embedding& keyframe, const IdentitySet& ids) {
    std::string out;
    for (double x : keyframe) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
            out.push_back(static_cast<char>(bits >> (8 * b)));
        }
    }
    for (const auto& id : ids) {
        out += '\x1F';
        out += id;
    }
    return out;
}

class FailingProvider final : public Provider {
public:
    explicit FailingProvider(std::size_t fail_from) : fail_from_(fail_from) {}
    std::size_t dim() const override { return 2; }

protected:
    Embedding do_embed_text(std::string_view) override { return {1.0, 0.0}; }
    SegmentEncoding do_encode_segment(const SegmentInput& in) override {
        if (in.segment.start_index >= fail_from_) {
            throw ProviderError(-32000, "boom at " + std::to_string(in.segment.start_index));
        }
        return {in.segment, {1.0, 0.0}, std::nullopt};
    }
    std::string do_caption(const SegmentInput&) override { return {}; }
    nlohmann::json do_parse_query(std::string_view) override { return {}; }
    std::string do_synthesize(std::string_view, std::span<const std::string>) override { return {}; }

private:
    std::size_t fail_from_;
};

} // namespace

TEST_CASE("keyframe is the floor of the midpoint") {
    CHECK(keyframe_of({"v", 3, 7, 0}) == 5);
    CHECK(keyframe_of({"v", 3, 8, 0}) == 5);
    CHECK(keyframe_of({"v", 0, 0, 0}) == 0);
}

TEST_CASE("aggregated detections are the union over the segment frames") {
    std::vector<PersonDetection> dets{{"v", 1, 1.0, {0.1, 0.1}, "A"},
                                      {"v", 2, 2.0, {0.2, 0.2}, "A"},
                                      {"v", 2, 2.0, {0.3, 0.3}, "B"},
                                      {"v", 4, 4.0, {0.4, 0.4}, "C"}};
    DetectionIndex index(dets, 6);
    auto agg = aggregate_detections({"v", 1, 2, 1}, index);
    REQUIRE(agg.size() == 3);
    CHECK(agg[0].identity == "A");
    CHECK(agg[0].frame_index == 1);
    CHECK(agg[1].frame_index == 2);
    CHECK(agg[2].identity == "B");
    CHECK(aggregate_detections({"v", 5, 5, 5}, index).empty());
}

TEST_CASE("aggregation equals a brute-force frame-range filter") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = vftest::random_stream(rng, "a", vftest::pick(rng, 1, 80), 2, 5);
        auto index = s.detection_index();
        std::size_t a = vftest::pick(rng, 0, s.frames.size() - 1);
        std::size_t b = vftest::pick(rng, a, s.frames.size() - 1);
        std::vector<PersonDetection> expected;
        for (const auto& d : s.detections) {
            if (d.frame_index >= a && d.frame_index <= b) {
                expected.push_back(d);
            }
        }
        CHECK(aggregate_detections({"a", a, b, (a + b) / 2}, index) == expected);
    }
}

TEST_CASE("mock encodings follow the documented hash embedding") {
    std::mt19937_64 rng(32);
    MockProvider provider(16, 99);
    for (int trial = 0; trial < 30; ++trial) {
        auto s = vftest::random_stream(rng, "m", vftest::pick(rng, 1, 40), 16, 4);
        auto segs = segment_video(s.frames, s.detection_index(), vftest::random_config(rng, s.frames));
        auto encs = encode_all(segs, s.frames, s.detection_index(), provider);
        REQUIRE(encs.size() == segs.size());
        for (std::size_t i = 0; i < segs.size(); ++i) {
            IdentitySet ids;
            for (const auto& d : s.detections) {
                if (d.frame_index >= segs[i].start_index && d.frame_index <= segs[i].end_index) {
                    ids.insert(d.identity);
                }
            }
            Embedding expected = reference_hash_embedding(
                reference_segment_bytes(s.frames[segs[i].keyframe_index].embedding, ids), 16, 99);
            CHECK(encs[i].segment == segs[i]);
            REQUIRE(encs[i].content.size() == 16);
            for (std::size_t k = 0; k < 16; ++k) {
                CHECK(encs[i].content[k] == doctest::Approx(expected[k]).epsilon(1e-12));
            }
        }
    }
    CHECK(provider.embed_text("hello") == reference_hash_embedding("text:hello", 16, 99));
}

TEST_CASE("zero-detection mock encoding depends only on the keyframe") {
    MockProvider provider(2);
    std::vector<FrameFeature> f1{{"x", 0, 0.0, {1.0, 2.0}}, {"x", 1, 1.0, {9.0, 9.0}}};
    std::vector<FrameFeature> f2{{"y", 0, 0.0, {7.0, 7.0}}, {"y", 1, 0.5, {9.0, 9.0}}};
    Segment s1{"x", 1, 1, 1};
    Segment s2{"y", 1, 1, 1};
    auto e1 = encode_all(std::span(&s1, 1), f1, DetectionIndex({}, 2), provider);
    auto e2 = encode_all(std::span(&s2, 1), f2, DetectionIndex({}, 2), provider);
    CHECK(e1[0].content == e2[0].content);
    CHECK(e1[0].content == reference_hash_embedding(reference_segment_bytes({9.0, 9.0}, {}), 2, 0));
}

TEST_CASE("concurrent encoding equals sequential encoding") {
    std::mt19937_64 rng(33);
    auto s = vftest::random_stream(rng, "c", 150, 12, 5);
    auto segs = segment_video(s.frames, s.detection_index(), vftest::random_config(rng, s.frames));
    MockProvider provider(12);
    auto seq = encode_all(segs, s.frames, s.detection_index(), provider, 1);
    auto par = encode_all(segs, s.frames, s.detection_index(), provider, 8);
    CHECK(seq == par);
}

TEST_CASE("encoding failures surface the lowest failing segment") {
    std::vector<FrameFeature> frames;
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < 20; ++i) {
        frames.push_back({"f", i, static_cast<double>(i), {0.0, 0.0}});
        segs.push_back({"f", i, i, i});
    }
    FailingProvider provider(7);
    for (std::size_t threads : {1u, 4u}) {
        try {
            encode_all(segs, frames, DetectionIndex({}, 20), provider, threads);
            FAIL("expected a provider error");
        } catch (const ProviderError& e) {
            CHECK(std::string(e.what()).find("boom at 7") != std::string::npos);
        }
    }
}

TEST_CASE("mock captions and synthesis are templated") {
    MockProvider provider(4);
    std::vector<PersonDetection> dets{{"v", 0, 0.0, {0.0, 0.0}, "B"}, {"v", 1, 1.0, {0.0, 0.0}, "A"}};
    Segment seg{"v", 0, 1, 0};
    Embedding kf{0.0, 0.0};
    CHECK(provider.caption({seg, kf, dets}) == "persons A,B present, frames 0-1");
    CHECK(provider.caption({seg, kf, {}}) == "persons none present, frames 0-1");
    std::vector<std::string> ev{"x", "y"};
    CHECK(provider.synthesize("summarize", ev) == "summary (summarize): x; y");
    CHECK(provider.call_count() == 3);
}

TEST_CASE("mock query grammar") {
    auto q = mock_parse_query("Was P3 in Lab on 2024-03-01?");
    CHECK(q["task"] == "presence");
    CHECK(q["identities"] == nlohmann::json::array({"P3"}));
    CHECK(q["locations"] == nlohmann::json::array({"Lab"}));
    CHECK(q["date_range"]["from"] == "2024-03-01");
    CHECK(q["date_range"]["to"] == "2024-03-01");

    auto c = mock_parse_query("who appeared in Lab, Library and Gym on 2024-03-01 to 2024-03-02");
    CHECK(c["task"] == "common_identity");
    CHECK(c["locations"] == nlohmann::json::array({"Lab", "Library", "Gym"}));
    CHECK(c["date_range"]["to"] == "2024-03-02");

    CHECK(mock_parse_query("when was P1 in Gym")["task"] == "locate");
    CHECK(mock_parse_query("how many people were in Gym on 2024-03-02")["task"] == "count");
    CHECK(mock_parse_query("summarize Lab")["task"] == "summarize");

    for (const char* bad : {"tell me a story", "was P1 in", "was P1 in Lab on yesterday", "who appeared in , Lab"}) {
        try {
            mock_parse_query(bad);
            FAIL("accepted: " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::parse);
        }
    }
}
