#pragma once

#include "vforest/agents.hpp"
#include "vforest/knowledge_base.hpp"
#include "vforest/search.hpp"
#include "vforest/segmentation.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vforest {

struct ProviderConfig {
    std::string mode = "mock";  // mock | subprocess | http
    std::string address;        // command line or base URL
    std::size_t dim = 0;        // mock only; 0 takes the corpus dimension
    std::uint64_t seed = 0;     // mock only
    std::size_t max_concurrency = 1;
};

// Sections and keys of the config file:
//
//   [segmenter] eps1, eps2 (number or "auto"), delta_p, auto_calibrate
//   [forest]    fanout, threads
//   [search]    tau_rel, use_reid, max_depth (integer or "none"), leaf_fallback
//   [agents]    use_filter, leaf_fallback, max_kb_evidence
//   [kb]        c_max, tau_sim, tau_conf
//   [provider]  mode, address, dim, seed, max_concurrency
//   [paths]     forest, kb
struct EngineConfig {
    SegmenterSettings segmenter;
    std::size_t fanout = 4;
    std::size_t build_threads = 1;
    SearchOptions search;
    bool use_filter = true;
    bool agents_leaf_fallback = true;
    std::size_t max_kb_evidence = 16;
    KBConfig kb;
    ProviderConfig provider;
    std::string forest_path = "forest.json";
    std::string kb_path = "kb.jsonl";

    // key is "section.name"; throws Error(validation) on unknown keys or
    // unparsable values.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;
    static const std::vector<std::string>& keys();

    // `source` names the origin in error messages.
    void apply_file_text(std::string_view text, const std::string& source = "config");
    void apply_file(const std::string& path);

    void validate() const;
    nlohmann::json to_json() const;
    PipelineOptions pipeline_options() const;
};

// defaults < file < overrides.  The file is `path` if given, else the
// ENGINE_CONFIG environment variable if set.
EngineConfig resolve_config(const std::optional<std::string>& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides);

} // namespace vforest
