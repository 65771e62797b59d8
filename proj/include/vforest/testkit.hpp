#pragma once

// Synthetic multi-camera scenarios with ground truth, and naive reference
// implementations used to cross-check the engine.  Depends on the data
// model only.

#include "vforest/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vforest::testkit {

struct CameraSpec {
    std::string video_id;
    std::string location;
    Date date;
    std::size_t duration_frames = 240;
    std::vector<std::size_t> transitions;  // frames where the scene embedding changes
};

struct PlantedEvent {
    Identity identity;
    std::vector<std::size_t> cameras;                           // indices into ScenarioSpec::cameras
    std::vector<std::pair<std::size_t, std::size_t>> windows;   // inclusive frames, one per camera
    std::string description;
};

struct ScenarioSpec {
    std::uint64_t seed = 1;
    std::vector<CameraSpec> cameras;
    std::size_t identities = 0;  // background identities, one random window each
    std::size_t dim = 32;
    double fps = 5.0;
    std::vector<PlantedEvent> planted_events;
    double reid_noise_rate = 0.0;

    // Throws Error(validation) for infeasible specs.
    void validate() const;
    nlohmann::json to_json() const;
    static ScenarioSpec from_json(const nlohmann::json& doc);
};

// Three locations on two dates, five planted traversals, twelve
// background identities.
ScenarioSpec default_spec(std::uint64_t seed = 1);

struct IdentityInterval {
    std::string video_id;
    std::size_t first_frame = 0;
    std::size_t last_frame = 0;
    double first_ts = 0.0;
    double end_ts = 0.0;  // exclusive: (last_frame + 1) / fps
};

struct CameraTruth {
    std::string video_id;
    std::string location;
    Date date;
    std::size_t frame_count = 0;
    std::vector<std::size_t> boundaries;  // first frame of every segment but the first
    IdentitySet identities;
    std::size_t frame_records = 0;
    std::size_t detection_records = 0;
};

struct GroundTruthManifest {
    std::vector<CameraTruth> cameras;
    std::map<Identity, std::vector<IdentityInterval>> appearances;

    nlohmann::json to_json() const;
};

struct GeneratedQuery {
    std::string id;
    std::string modality;
    nlohmann::json query;     // structured query document
    nlohmann::json expected;  // answer key
};

struct Scenario {
    std::vector<VideoStream> streams;
    GroundTruthManifest manifest;
    std::vector<GeneratedQuery> queries;
};

Scenario generate(const ScenarioSpec& spec);

nlohmann::json queries_to_json(const std::vector<GeneratedQuery>& queries);
std::vector<GeneratedQuery> queries_from_json(const nlohmann::json& doc);

// <dir>/streams/<video_id>.jsonl, <dir>/manifest.json, <dir>/queries.json
void write_scenario(const Scenario& scenario, const std::string& dir);

// Answer key recomputed by scanning the streams directly.
nlohmann::json replay_expected(const nlohmann::json& query, const std::vector<VideoStream>& streams);

// ---- reference implementations ------------------------------------------

struct OracleFlags {
    bool c1 = false;
    bool c2 = false;
    bool c3 = false;
    bool any() const { return c1 || c2 || c3; }
};

// Entry j describes the pair (j-1, j); entry 0 is always clear.
std::vector<OracleFlags> oracle_boundary_flags(const std::vector<FrameFeature>& frames,
                                               const std::vector<PersonDetection>& detections, double eps1,
                                               double eps2, std::size_t delta_p);
// Inclusive (start, end) pairs.
std::vector<std::pair<std::size_t, std::size_t>> oracle_segment(const std::vector<FrameFeature>& frames,
                                                                const std::vector<PersonDetection>& detections,
                                                                double eps1, double eps2, std::size_t delta_p);
double oracle_calibrate(const std::vector<FrameFeature>& frames);

struct OracleNode {
    std::vector<std::size_t> children;
    IdentitySet identities;
    double relevance = 0.0;
    int depth = 0;
};

struct OracleSearchResult {
    std::vector<std::pair<std::size_t, bool>> hits;  // (node, fallback) in temporal order
    std::set<std::size_t> scored;
};

OracleSearchResult oracle_search(const std::vector<OracleNode>& nodes, std::size_t root, double tau_rel,
                                 const IdentitySet& required, bool use_reid, std::optional<int> max_depth,
                                 bool leaf_fallback);

struct OracleFact {
    Date date;
    std::string location;
    std::string description;
    int confidence = 1;

    bool operator==(const OracleFact&) const = default;
};

using OracleSimilarity = std::function<double(const std::string&, const std::string&)>;

double oracle_jaccard(const std::string& a, const std::string& b);
void oracle_kb_upsert(std::vector<OracleFact>& kb, const OracleFact& incoming, int c_max, double tau_sim,
                      const OracleSimilarity& similarity);
std::vector<OracleFact> oracle_retrieve(const std::vector<OracleFact>& kb, const std::optional<DateRange>& dates,
                                        const std::optional<std::set<std::string>>& locations,
                                        const std::optional<std::string>& query, int tau_conf,
                                        const OracleSimilarity& similarity);

std::vector<std::string> oracle_filter(const std::vector<VideoMeta>& videos, const std::optional<DateRange>& dates,
                                       const std::optional<std::set<std::string>>& locations);

// Detections of `identity` whose timestamp lies in the closed window and
// whose video sits at one of the locations.
std::vector<PersonDetection> oracle_detections(const std::vector<VideoStream>& streams, const Identity& identity,
                                               const std::optional<std::pair<double, double>>& window,
                                               const std::optional<std::set<std::string>>& locations);
IdentitySet oracle_common_identities(const std::vector<VideoStream>& streams,
                                     const std::vector<std::string>& video_ids,
                                     const std::optional<std::pair<double, double>>& window);

} // namespace vforest::testkit
