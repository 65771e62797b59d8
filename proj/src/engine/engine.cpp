#include "vforest/engine.hpp"

#include "vforest/encoding.hpp"
#include "vforest/error.hpp"
#include "vforest/mock_provider.hpp"
#include "vforest/rpc.hpp"
#include "vforest/segmentation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace vforest {

VideoTree build_video_tree(const VideoStream& stream, const EngineConfig& config, Provider& provider,
                           VideoBuildStats* stats) {
    if (stream.frames.empty()) {
        throw Error(ErrorCode::validation, "video " + stream.meta.video_id + " has no frames");
    }
    DetectionIndex index = stream.detection_index();
    SegmenterConfig seg_cfg = config.segmenter.resolve(stream.frames);
    std::vector<Segment> segments = segment_video(stream.frames, index, seg_cfg);
    for (auto& s : segments) {
        s.video_id = stream.meta.video_id;
    }
    std::vector<SegmentEncoding> encodings =
        encode_all(segments, stream.frames, index, provider, config.provider.max_concurrency);
    VideoTree tree = build_tree(segments, encodings, index, stream.meta, config.fanout);
    if (stats) {
        *stats = {stream.meta.video_id, stream.frames.size(), segments.size(), tree.nodes.size(), tree.height(),
                  seg_cfg.eps1, seg_cfg.eps2};
    }
    return tree;
}

Forest build_forest(std::span<const VideoStream> streams, const EngineConfig& config, Provider& provider,
                    std::vector<VideoBuildStats>* stats) {
    if (streams.empty()) {
        throw Error(ErrorCode::validation, "empty corpus: nothing to build");
    }
    config.validate();
    Forest forest;
    forest.trees.resize(streams.size());
    std::vector<VideoBuildStats> local(streams.size());

    std::size_t workers = provider.serial() ? 1 : std::clamp<std::size_t>(config.build_threads, 1, streams.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = streams.size();
    std::exception_ptr error;
    auto work = [&] {
        for (std::size_t i = next++; i < streams.size(); i = next++) {
            try {
                forest.trees[i] = build_video_tree(streams[i], config, provider, &local[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    forest.identity_index = GlobalIdentityIndex(forest.trees);
    if (stats) {
        *stats = std::move(local);
    }
    return forest;
}

std::unique_ptr<Provider> make_provider(const EngineConfig& config, std::size_t corpus_dim) {
    const ProviderConfig& p = config.provider;
    if (p.mode == "mock") {
        std::size_t dim = p.dim != 0 ? p.dim : corpus_dim;
        if (dim == 0) {
            throw Error(ErrorCode::validation, "mock provider needs provider.dim or a loaded corpus");
        }
        return std::make_unique<MockProvider>(dim, p.seed);
    }
    if (p.mode == "http" && p.address.rfind("http://", 0) != 0 && p.address.rfind("https://", 0) != 0) {
        throw Error(ErrorCode::validation, "http provider address must start with http:// or https://");
    }
    return rpc::connect(p.address);
}

Engine::Engine(EngineConfig config) : config_(std::move(config)), kb_(config_.kb) {
    config_.validate();
}

void Engine::add_stream(VideoStream stream) {
    for (const auto& s : streams_) {
        if (s.meta.video_id == stream.meta.video_id) {
            throw Error(ErrorCode::validation, "duplicate video id " + stream.meta.video_id);
        }
        if (s.meta.dim != stream.meta.dim) {
            throw Error(ErrorCode::validation, "video " + stream.meta.video_id + " has dimension " +
                                                   std::to_string(stream.meta.dim) + ", corpus has " +
                                                   std::to_string(s.meta.dim));
        }
    }
    streams_.push_back(std::move(stream));
}

std::size_t Engine::corpus_dim() const {
    if (!streams_.empty()) {
        return streams_.front().meta.dim;
    }
    if (has_forest_ && !forest_.trees.empty()) {
        return forest_.trees.front().meta.dim;
    }
    return 0;
}

Provider& Engine::provider() {
    if (!provider_) {
        provider_ = make_provider(config_, corpus_dim());
    }
    return *provider_;
}

const Forest& Engine::build() {
    forest_ = build_forest(streams_, config_, provider(), &stats_);
    has_forest_ = true;
    return forest_;
}

void Engine::set_forest(Forest forest) {
    forest_ = std::move(forest);
    has_forest_ = true;
}

const Forest& Engine::forest() const {
    if (!has_forest_) {
        throw Error(ErrorCode::validation, "no forest built or loaded");
    }
    return forest_;
}

Answer Engine::ask(std::string_view raw_query) {
    return ask(raw_query, config_.pipeline_options());
}

Answer Engine::ask(std::string_view raw_query, const PipelineOptions& options) {
    const Forest& f = forest();
    return answer_query(raw_query, f, kb_, provider(), options);
}

std::vector<SearchResult> Engine::search(std::string_view text, const IdentitySet& identities,
                                         const SearchOptions& options, const std::optional<std::string>& video_id) {
    const Forest& f = forest();
    options.validate();
    std::vector<const VideoTree*> trees;
    for (const auto& t : f.trees) {
        if (!video_id || t.meta.video_id == *video_id) {
            trees.push_back(&t);
        }
    }
    if (video_id && trees.empty()) {
        throw Error(ErrorCode::validation, "unknown video id " + *video_id);
    }
    Embedding q = provider().embed_text(text);
    std::vector<SearchResult> out;
    for (const VideoTree* t : trees) {
        out.push_back(vforest::search(q, identities, *t, cosine_relevance, options));
    }
    return out;
}

} // namespace vforest
