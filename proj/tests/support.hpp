#pragma once

#include "vforest/encoding.hpp"
#include "vforest/forest.hpp"
#include "vforest/mock_provider.hpp"
#include "vforest/model.hpp"
#include "vforest/search.hpp"
#include "vforest/segmentation.hpp"
#include "vforest/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace vftest {

using namespace vforest;

inline double uniform(std::mt19937_64& rng, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) {
    return std::bernoulli_distribution(p)(rng);
}

// Piecewise-constant embeddings with jitter and sticky on/off identities.
inline VideoStream random_stream(std::mt19937_64& rng, const std::string& video_id, std::size_t frames,
                                 std::size_t dim, std::size_t identity_pool,
                                 const std::string& location = "Lab", const std::string& date = "2024-03-01") {
    VideoStream s;
    s.meta = {video_id, location, Date::parse(date), uniform(rng, 1.0, 10.0), frames, dim};
    Embedding base(dim);
    for (auto& x : base) {
        x = uniform(rng, -1.0, 1.0);
    }
    double jitter = uniform(rng, 0.0, 0.2);
    std::vector<bool> on(identity_pool, false);
    for (std::size_t i = 0; i < frames; ++i) {
        if (coin(rng, 0.08)) {
            for (auto& x : base) {
                x = uniform(rng, -1.0, 1.0);
            }
        }
        FrameFeature f{video_id, i, static_cast<double>(i) / s.meta.fps, base};
        for (auto& x : f.embedding) {
            x += uniform(rng, -jitter, jitter);
        }
        s.frames.push_back(std::move(f));
        for (std::size_t k = 0; k < identity_pool; ++k) {
            if (coin(rng, 0.06)) {
                on[k] = !on[k];
            }
            if (on[k]) {
                std::string id = (k < 10 ? "I0" : "I") + std::to_string(k);
                s.detections.push_back({video_id, i, static_cast<double>(i) / s.meta.fps,
                                        {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)}, id});
            }
        }
    }
    std::sort(s.detections.begin(), s.detections.end(), [](const auto& a, const auto& b) {
        return std::tie(a.frame_index, a.identity) < std::tie(b.frame_index, b.identity);
    });
    return s;
}

// Thresholds scaled off the calibrated value, sometimes disabled.
inline SegmenterConfig random_config(std::mt19937_64& rng, const std::vector<FrameFeature>& frames) {
    double cal = testkit::oracle_calibrate(frames);
    auto threshold = [&] {
        if (coin(rng, 0.15) || !std::isfinite(cal)) {
            return std::numeric_limits<double>::infinity();
        }
        return cal * uniform(rng, 0.3, 2.5);
    };
    SegmenterConfig cfg;
    cfg.eps1 = threshold();
    cfg.eps2 = threshold();
    cfg.delta_p = pick(rng, 1, 3);
    return cfg;
}

// Tree over exactly `leaves` random cut segments of a random stream.
inline VideoTree random_tree(std::mt19937_64& rng, std::size_t leaves, std::size_t fanout,
                             std::size_t identity_pool = 6, VideoStream* stream_out = nullptr) {
    std::size_t frames = leaves + pick(rng, 0, 3 * leaves);
    VideoStream s = random_stream(rng, "T" + std::to_string(pick(rng, 0, 999999)), frames, 4, identity_pool);
    std::vector<std::size_t> cuts(frames - 1);
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        cuts[i] = i + 1;
    }
    std::shuffle(cuts.begin(), cuts.end(), rng);
    cuts.resize(leaves - 1);
    std::sort(cuts.begin(), cuts.end());
    std::vector<Segment> segments;
    std::size_t start = 0;
    for (std::size_t c : cuts) {
        segments.push_back({s.meta.video_id, start, c - 1, 0});
        start = c;
    }
    segments.push_back({s.meta.video_id, start, frames - 1, 0});
    for (auto& seg : segments) {
        seg.keyframe_index = keyframe_of(seg);
    }
    DetectionIndex index = s.detection_index();
    MockProvider provider(4, 3);
    auto encodings = encode_all(segments, s.frames, index, provider);
    VideoTree tree = build_tree(segments, encodings, index, s.meta, fanout);
    if (stream_out) {
        *stream_out = std::move(s);
    }
    return tree;
}

inline std::vector<testkit::OracleNode> oracle_nodes(const VideoTree& tree, const std::vector<double>& relevance) {
    std::vector<testkit::OracleNode> out(tree.nodes.size());
    for (const auto& n : tree.nodes) {
        auto& o = out[n.id];
        o.children.assign(n.children.begin(), n.children.end());
        for (const auto& [id, _] : n.reid_summary) {
            o.identities.insert(id);
        }
        o.relevance = relevance[n.id];
        o.depth = n.depth;
    }
    return out;
}

inline RelevanceFn table_relevance(const std::vector<double>& table) {
    return [&table](std::span<const double>, const TreeNode& n) { return table.at(n.id); };
}

} // namespace vftest
