#pragma once

#include "vforest/agents.hpp"
#include "vforest/config.hpp"
#include "vforest/forest_io.hpp"
#include "vforest/knowledge_base.hpp"
#include "vforest/provider.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vforest {

struct VideoBuildStats {
    std::string video_id;
    std::size_t frames = 0;
    std::size_t segments = 0;
    std::size_t nodes = 0;
    int height = 0;
    double eps1 = 0.0;
    double eps2 = 0.0;
};

// Segments, encodes and builds the tree of one video.
VideoTree build_video_tree(const VideoStream& stream, const EngineConfig& config, Provider& provider,
                           VideoBuildStats* stats = nullptr);

// Trees in input order plus the identity index.  Videos are built on up to
// config.build_threads threads.
Forest build_forest(std::span<const VideoStream> streams, const EngineConfig& config, Provider& provider,
                    std::vector<VideoBuildStats>* stats = nullptr);

// Mock providers take config.provider.dim, or corpus_dim when it is 0.
std::unique_ptr<Provider> make_provider(const EngineConfig& config, std::size_t corpus_dim);

class Engine {
public:
    explicit Engine(EngineConfig config = {});

    const EngineConfig& config() const noexcept { return config_; }

    // Rejects duplicate video ids and dimension mismatches across the corpus.
    void add_stream(VideoStream stream);
    const std::vector<VideoStream>& streams() const noexcept { return streams_; }

    const Forest& build();
    const std::vector<VideoBuildStats>& build_stats() const noexcept { return stats_; }

    void set_forest(Forest forest);
    bool has_forest() const noexcept { return has_forest_; }
    const Forest& forest() const;

    KnowledgeBase& kb() noexcept { return kb_; }
    void set_kb(KnowledgeBase kb) { kb_ = std::move(kb); }

    // Created on first use from the config and the corpus dimension.
    Provider& provider();
    void set_provider(std::unique_ptr<Provider> provider) { provider_ = std::move(provider); }

    Answer ask(std::string_view raw_query);
    Answer ask(std::string_view raw_query, const PipelineOptions& options);

    // Plain tree search over every video (or one), query text embedded by
    // the provider.
    std::vector<SearchResult> search(std::string_view text, const IdentitySet& identities,
                                     const SearchOptions& options, const std::optional<std::string>& video_id = {});

private:
    std::size_t corpus_dim() const;

    EngineConfig config_;
    std::vector<VideoStream> streams_;
    std::vector<VideoBuildStats> stats_;
    Forest forest_;
    bool has_forest_ = false;
    KnowledgeBase kb_;
    std::unique_ptr<Provider> provider_;
};

// ---- evaluation -----------------------------------------------------------

struct EvalQuery {
    std::string id;
    Modality modality = Modality::single;
    StructuredQuery query;
    nlohmann::json expected;
};

std::vector<EvalQuery> eval_queries_from_json(const nlohmann::json& doc);

// Compares an answer payload with the answer key of its task.
bool answer_matches(const StructuredQuery& query, const Answer& answer, const nlohmann::json& expected);

struct Score {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalRow {
    std::string label;
    std::map<Modality, Score> by_modality;
    Score overall;
    std::size_t errors = 0;
    std::size_t provider_calls = 0;
    double seconds = 0.0;
    std::vector<std::string> failures;  // query ids answered wrongly or with errors
};

struct EvalReport {
    std::vector<EvalRow> rows;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

inline constexpr const char* ablation_no_reid = "w/o ReID in Search";
inline constexpr const char* ablation_no_filter = "w/o Video Filter";
inline constexpr const char* ablation_shallow = "w/o Deep Tree Traversal";

// Runs every query against a fresh copy of `kb`.
EvalRow evaluate_row(const std::string& label, const Forest& forest, const std::vector<EvalQuery>& queries,
                     Provider& provider, const KnowledgeBase& kb, const PipelineOptions& options);

// The default row followed, when ablations is set, by one row per toggle.
// The depth-limited row searches no deeper than shallow_depth.
EvalReport evaluate(const Forest& forest, const std::vector<EvalQuery>& queries, Provider& provider,
                    const KnowledgeBase& kb, const PipelineOptions& options, bool ablations = true,
                    int shallow_depth = 1);

} // namespace vforest
