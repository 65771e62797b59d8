#pragma once

// Five-stage query pipeline: video selection, knowledge-base retrieval,
// tree navigation, integration, knowledge-base update.

#include "vforest/forest_io.hpp"
#include "vforest/knowledge_base.hpp"
#include "vforest/provider.hpp"
#include "vforest/search.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vforest {

enum class Task { locate, presence, common_identity, count, summarize };
enum class Modality { single, cross_spatial, cross_temporal, cross_spatiotemporal };

const char* to_string(Task task) noexcept;
const char* to_string(Modality modality) noexcept;
std::optional<Task> task_from_string(std::string_view s) noexcept;
std::optional<Modality> modality_from_string(std::string_view s) noexcept;

inline constexpr Modality all_modalities[] = {Modality::single, Modality::cross_spatial, Modality::cross_temporal,
                                              Modality::cross_spatiotemporal};

// Document form:
//   {"task": "presence", "identities": ["P3"], "locations": ["Lab"],
//    "date_range": {"from": "2024-03-01", "to": "2024-03-02"},
//    "description": "...", "modality": "single"}
// Every field but task is optional; description or identities must be given.
struct StructuredQuery {
    Task task = Task::presence;
    std::optional<DateRange> date_range;
    std::optional<std::set<std::string>> locations;
    std::optional<IdentitySet> identities;
    std::string description;
    std::optional<Modality> modality;

    // Throws Error(parse) on malformed documents.
    static StructuredQuery from_json(const nlohmann::json& doc);
    static StructuredQuery parse(std::string_view text);
    nlohmann::json to_json() const;

    // Text handed to embed_text.
    std::string query_text() const;
    bool operator==(const StructuredQuery&) const = default;
};

struct PipelineOptions {
    SearchOptions search{0.85, true, std::nullopt, true, false};
    bool use_filter = true;
    std::size_t max_kb_evidence = 16;
};

struct StageRecord {
    int index = 0;
    std::string name;
    std::string status;  // "done", "skipped" or "no-op"
    std::string detail;
};

struct Answer {
    Task task = Task::presence;
    std::string text;
    bool insufficient_evidence = false;
    bool short_circuit = false;
    std::vector<SearchHit> hits;
    std::vector<KBEntry> kb_evidence;
    std::vector<KBEntry> derived_facts;
    nlohmann::json payload = nlohmann::json::object();
    std::vector<StageRecord> stages;
    std::size_t provider_calls = 0;
    std::vector<TraceEntry> trace;

    nlohmann::json to_json(bool include_trace = false) const;
};

inline constexpr const char* insufficient_evidence_text = "insufficient evidence";

// Stage 1.  Throws on an empty corpus.
std::vector<const VideoTree*> filter_videos(const StructuredQuery& query, const Forest& forest, bool use_filter = true);

struct KBContext {
    std::vector<RankedEntry> entries;
    bool short_circuit = false;
};

// Stage 2.  Short-circuits presence queries when every required identity has
// a priority-tier "person <id> present" entry within the query's scope.
KBContext retrieve_context(const StructuredQuery& query, const KnowledgeBase& kb, std::size_t limit = 16);

struct NavigationResult {
    std::vector<SearchHit> hits;  // grouped by video, in selection order
    std::vector<TraceEntry> trace;
    std::size_t relevance_evaluations = 0;
};

// Stage 3.  Identity tasks search at the configured threshold with ReID
// pruning; aggregate tasks (common_identity, count, summarize) use a zero
// threshold so every selected tree contributes its root.
NavigationResult navigate(const StructuredQuery& query, const std::vector<const VideoTree*>& selected,
                          Provider& provider, const PipelineOptions& options);

// Stage 4.
Answer integrate(const StructuredQuery& query, const std::vector<const VideoTree*>& selected,
                 const std::vector<SearchHit>& hits, const KBContext& context, Provider& provider);

struct PipelineHooks {
    // Runs between integration and the knowledge-base update.  No-op by default.
    std::function<void(const StructuredQuery&, Answer&)> reflection;
};

// Runs all five stages.  raw_query is a JSON document when it starts with
// '{', otherwise natural language sent to the provider's parse_query.
Answer answer_query(std::string_view raw_query, const Forest& forest, KnowledgeBase& kb, Provider& provider,
                    const PipelineOptions& options = {}, const PipelineHooks& hooks = {});
Answer answer_query(const StructuredQuery& query, const Forest& forest, KnowledgeBase& kb, Provider& provider,
                    const PipelineOptions& options = {}, const PipelineHooks& hooks = {});

// "person <id> present"
std::string presence_fact(const Identity& id);

} // namespace vforest
