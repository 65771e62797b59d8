#include "vforest/vforest.h"

#include "vforest/engine.hpp"
#include "vforest/error.hpp"
#include "vforest/testkit.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

struct vf_engine {
    vforest::Engine engine;
};

namespace {

using json = nlohmann::json;

thread_local std::string last_error;

vf_status status_of(vforest::ErrorCode code) {
    using vforest::ErrorCode;
    switch (code) {
    case ErrorCode::invalid_argument: return VF_ERR_INVALID_ARGUMENT;
    case ErrorCode::validation: return VF_ERR_VALIDATION;
    case ErrorCode::parse: return VF_ERR_PARSE;
    case ErrorCode::provider: return VF_ERR_PROVIDER;
    case ErrorCode::io: return VF_ERR_IO;
    case ErrorCode::format: return VF_ERR_FORMAT;
    case ErrorCode::version_mismatch: return VF_ERR_VERSION_MISMATCH;
    case ErrorCode::checksum: return VF_ERR_CHECKSUM;
    case ErrorCode::internal: return VF_ERR_INTERNAL;
    }
    return VF_ERR_INTERNAL;
}

template <typename F>
vf_status guarded(F&& body) {
    last_error.clear();
    try {
        body();
        return VF_OK;
    } catch (const vforest::Error& e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const json::exception& e) {
        last_error = std::string("malformed JSON argument: ") + e.what();
        return VF_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return VF_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return VF_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return VF_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) {
        throw vforest::Error(vforest::ErrorCode::invalid_argument, what);
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out) {
        *out = dup(s);
    }
}

std::vector<std::pair<std::string, std::string>> overrides_from(const char* overrides_json) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!overrides_json || !*overrides_json) {
        return out;
    }
    json j = json::parse(overrides_json);
    require(j.is_object(), "overrides must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        out.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    }
    return out;
}

vforest::EngineConfig config_from(const char* config_path, const char* overrides_json) {
    std::optional<std::string> path;
    if (config_path && *config_path) {
        path = config_path;
    }
    return vforest::resolve_config(path, overrides_from(overrides_json));
}

json stream_summary(const vforest::VideoStream& s) {
    vforest::IdentitySet ids;
    for (const auto& d : s.detections) {
        ids.insert(d.identity);
    }
    return {{"video_id", s.meta.video_id}, {"location", s.meta.location}, {"date", s.meta.date.to_string()},
            {"fps", s.meta.fps},           {"dim", s.meta.dim},           {"frames", s.frames.size()},
            {"detections", s.detections.size()}, {"identities", ids}};
}

json hit_json(const vforest::SearchHit& h) {
    return {{"video_id", h.video_id}, {"node", h.node},         {"depth", h.depth},
            {"interval", {h.t_start, h.t_end}}, {"relevance", h.relevance}, {"fallback", h.fallback},
            {"text", h.text ? json(*h.text) : json()}};
}

} // namespace

extern "C" {

const char* vf_version(void) {
    return "1.0.0";
}

const char* vf_last_error(void) {
    return last_error.c_str();
}

const char* vf_status_name(vf_status status) {
    switch (status) {
    case VF_OK: return "ok";
    case VF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case VF_ERR_VALIDATION: return "validation";
    case VF_ERR_PARSE: return "parse";
    case VF_ERR_PROVIDER: return "provider";
    case VF_ERR_IO: return "io";
    case VF_ERR_FORMAT: return "format";
    case VF_ERR_VERSION_MISMATCH: return "version_mismatch";
    case VF_ERR_CHECKSUM: return "checksum";
    case VF_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void vf_string_free(char* s) {
    std::free(s);
}

vf_status vf_config_resolve(const char* config_path, const char* overrides_json, char** out_json) {
    return guarded([&] {
        require(out_json, "out_json is null");
        put(out_json, config_from(config_path, overrides_json).to_json().dump());
    });
}

vf_status vf_engine_create(const char* config_path, const char* overrides_json, vf_engine** out) {
    return guarded([&] {
        require(out, "out is null");
        *out = nullptr;
        *out = new vf_engine{vforest::Engine(config_from(config_path, overrides_json))};
    });
}

void vf_engine_destroy(vf_engine* engine) {
    delete engine;
}

vf_status vf_engine_add_stream_file(vf_engine* engine, const char* path) {
    return guarded([&] {
        require(engine && path, "engine and path are required");
        engine->engine.add_stream(vforest::ingest_stream_file(path));
    });
}

vf_status vf_engine_add_stream_text(vf_engine* engine, const char* text) {
    return guarded([&] {
        require(engine && text, "engine and text are required");
        engine->engine.add_stream(vforest::ingest_stream_text(text));
    });
}

vf_status vf_engine_build(vf_engine* engine, char** out_stats_json) {
    return guarded([&] {
        require(engine, "engine is null");
        const vforest::Forest& f = engine->engine.build();
        json videos = json::array();
        for (const auto& s : engine->engine.build_stats()) {
            videos.push_back({{"video_id", s.video_id}, {"frames", s.frames}, {"segments", s.segments},
                              {"nodes", s.nodes}, {"height", s.height}, {"eps1", s.eps1}, {"eps2", s.eps2}});
        }
        put(out_stats_json, json{{"videos", videos},
                                 {"trees", f.trees.size()},
                                 {"identities", f.identity_index.entries().size()}}
                                .dump());
    });
}

vf_status vf_engine_validate(vf_engine* engine, char** out_json) {
    return guarded([&] {
        require(engine && out_json, "engine and out_json are required");
        json out = json::array();
        for (const auto& t : engine->engine.forest().trees) {
            for (const auto& v : vforest::validate_tree(t)) {
                out.push_back({{"video_id", t.meta.video_id},
                               {"kind", vforest::to_string(v.kind)},
                               {"node", v.node},
                               {"message", v.message}});
            }
        }
        put(out_json, json{{"violations", out}}.dump());
    });
}

vf_status vf_engine_save_forest(vf_engine* engine, const char* path) {
    return guarded([&] {
        require(engine && path, "engine and path are required");
        vforest::save_forest(engine->engine.forest(), path);
    });
}

vf_status vf_engine_load_forest(vf_engine* engine, const char* path) {
    return guarded([&] {
        require(engine && path, "engine and path are required");
        engine->engine.set_forest(vforest::load_forest(path));
    });
}

vf_status vf_engine_load_kb(vf_engine* engine, const char* path, int missing_ok) {
    return guarded([&] {
        require(engine && path, "engine and path are required");
        if (missing_ok && !std::filesystem::exists(path)) {
            engine->engine.set_kb(vforest::KnowledgeBase(engine->engine.config().kb));
            return;
        }
        engine->engine.set_kb(vforest::KnowledgeBase::load(path, engine->engine.config().kb));
    });
}

vf_status vf_engine_save_kb(vf_engine* engine, const char* path) {
    return guarded([&] {
        require(engine && path, "engine and path are required");
        engine->engine.kb().save(path);
    });
}

vf_status vf_engine_query(vf_engine* engine, const char* raw_query, int include_trace, char** out_json) {
    return guarded([&] {
        require(engine && raw_query && out_json, "engine, query and out_json are required");
        vforest::Answer a = engine->engine.ask(raw_query);
        put(out_json, a.to_json(include_trace != 0).dump());
    });
}

vf_status vf_engine_search(vf_engine* engine, const char* text, const char* identities_json, const char* video_id,
                           char** out_json) {
    return guarded([&] {
        require(engine && text && out_json, "engine, text and out_json are required");
        vforest::IdentitySet ids;
        if (identities_json && *identities_json) {
            json j = json::parse(identities_json);
            require(j.is_array(), "identities must be a JSON array");
            ids = j.get<vforest::IdentitySet>();
        }
        std::optional<std::string> vid;
        if (video_id && *video_id) {
            vid = video_id;
        }
        vforest::SearchOptions opts = engine->engine.config().search;
        opts.trace = true;
        auto results = engine->engine.search(text, ids, opts, vid);
        json out = json::array();
        for (const auto& r : results) {
            json hits = json::array();
            for (const auto& h : r.hits) {
                hits.push_back(hit_json(h));
            }
            json trace = json::array();
            for (const auto& t : r.trace) {
                trace.push_back({{"video_id", t.video_id}, {"node", t.node}, {"depth", t.depth},
                                 {"relevance", t.relevance}});
            }
            out.push_back({{"hits", hits}, {"trace", trace}, {"relevance_evaluations", r.relevance_evaluations}});
        }
        put(out_json, json{{"results", out}}.dump());
    });
}

vf_status vf_engine_kb_upsert(vf_engine* engine, const char* date, const char* location, const char* description,
                              char** out_outcome) {
    return guarded([&] {
        require(engine && date && location && description, "engine, date, location and description are required");
        auto d = vforest::Date::try_parse(date);
        if (!d) {
            throw vforest::Error(vforest::ErrorCode::validation, std::string("not a YYYY-MM-DD date: ") + date);
        }
        auto outcome = engine->engine.kb().upsert({*d, location, description, 1});
        put(out_outcome, vforest::to_string(outcome));
    });
}

vf_status vf_engine_kb_show(vf_engine* engine, char** out_json) {
    return guarded([&] {
        require(engine && out_json, "engine and out_json are required");
        const auto& kb = engine->engine.kb();
        json entries = json::array();
        for (const auto& e : kb.snapshot()) {
            entries.push_back({{"d", e.date.to_string()}, {"l", e.location}, {"s", e.description},
                               {"c", e.confidence}, {"priority", e.confidence >= kb.config().tau_conf}});
        }
        put(out_json, json{{"config", {{"c_max", kb.config().c_max}, {"tau_sim", kb.config().tau_sim},
                                       {"tau_conf", kb.config().tau_conf}}},
                           {"entries", entries}}
                          .dump());
    });
}

vf_status vf_engine_eval(vf_engine* engine, const char* queries_json, int ablations, char** out_json,
                         char** out_text) {
    return guarded([&] {
        require(engine && queries_json, "engine and queries_json are required");
        auto queries = vforest::eval_queries_from_json(json::parse(queries_json));
        auto& e = engine->engine;
        auto report = vforest::evaluate(e.forest(), queries, e.provider(), e.kb(), e.config().pipeline_options(),
                                        ablations != 0);
        put(out_json, report.to_json().dump());
        put(out_text, report.to_text());
    });
}

vf_status vf_ingest_file(const char* path, char** out_json) {
    return guarded([&] {
        require(path && out_json, "path and out_json are required");
        put(out_json, stream_summary(vforest::ingest_stream_file(path)).dump());
    });
}

vf_status vf_synth(const char* spec_json, uint64_t seed, const char* out_dir, char** out_json) {
    return guarded([&] {
        require(out_dir, "out_dir is required");
        namespace tk = vforest::testkit;
        tk::ScenarioSpec spec =
            spec_json && *spec_json ? tk::ScenarioSpec::from_json(json::parse(spec_json)) : tk::default_spec(seed);
        tk::Scenario sc = tk::generate(spec);
        tk::write_scenario(sc, out_dir);
        json videos = json::array();
        for (const auto& s : sc.streams) {
            videos.push_back(stream_summary(s));
        }
        put(out_json, json{{"out_dir", out_dir}, {"videos", videos}, {"queries", sc.queries.size()}}.dump());
    });
}

} // extern "C"
