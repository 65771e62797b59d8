#include "vforest/vforest.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_internal = 1;
constexpr int exit_validation = 2;
constexpr int exit_provider = 3;

struct Failure {
    vf_status status;
    std::string message;
};

struct CString {
    char* p = nullptr;
    ~CString() { vf_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

void check(vf_status s, const std::string& context = {}) {
    if (s != VF_OK) {
        std::string msg = vf_last_error();
        throw Failure{s, context.empty() ? msg : context + ": " + msg};
    }
}

int exit_code_of(vf_status s) {
    switch (s) {
    case VF_OK: return exit_ok;
    case VF_ERR_PROVIDER: return exit_provider;
    case VF_ERR_INTERNAL: return exit_internal;
    default: return exit_validation;
    }
}

[[noreturn]] void usage_error(const std::string& msg) {
    throw Failure{VF_ERR_VALIDATION, msg};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Failure{VF_ERR_IO, "cannot read " + path};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Globals {
    std::string config_path;
    bool json_out = false;
    bool trace = false;
    std::string provider;
    std::optional<double> tau_rel;
    bool no_reid = false;
    bool no_filter = false;
    std::string max_depth;
    bool leaf_fallback = false;
    std::optional<std::uint64_t> seed;
    std::string forest_path;
    std::string kb_path;
    std::vector<std::string> sets;
};

std::string overrides_json(const Globals& g) {
    json o = json::object();
    for (const auto& kv : g.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            usage_error("--set expects key=value, got '" + kv + "'");
        }
        o[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!g.provider.empty()) {
        if (g.provider == "mock") {
            o["provider.mode"] = "mock";
        } else {
            bool http = g.provider.rfind("http://", 0) == 0 || g.provider.rfind("https://", 0) == 0;
            o["provider.mode"] = http ? "http" : "subprocess";
            o["provider.address"] = g.provider;
        }
    }
    if (g.tau_rel) {
        std::ostringstream ss;
        ss.precision(17);
        ss << *g.tau_rel;
        o["search.tau_rel"] = ss.str();
    }
    if (g.no_reid) {
        o["search.use_reid"] = "false";
    }
    if (g.no_filter) {
        o["agents.use_filter"] = "false";
    }
    if (!g.max_depth.empty()) {
        o["search.max_depth"] = g.max_depth;
    }
    if (g.leaf_fallback) {
        o["search.leaf_fallback"] = "true";
    }
    if (g.seed) {
        o["provider.seed"] = std::to_string(*g.seed);
    }
    if (!g.forest_path.empty()) {
        o["paths.forest"] = g.forest_path;
    }
    if (!g.kb_path.empty()) {
        o["paths.kb"] = g.kb_path;
    }
    return o.dump();
}

const char* config_arg(const Globals& g) {
    return g.config_path.empty() ? nullptr : g.config_path.c_str();
}

json resolved_config(const Globals& g) {
    CString out;
    check(vf_config_resolve(config_arg(g), overrides_json(g).c_str(), &out.p), "config");
    return json::parse(out.str());
}

class EngineHandle {
public:
    explicit EngineHandle(const Globals& g) {
        check(vf_engine_create(config_arg(g), overrides_json(g).c_str(), &e_), "config");
    }
    ~EngineHandle() { vf_engine_destroy(e_); }
    EngineHandle(const EngineHandle&) = delete;
    EngineHandle& operator=(const EngineHandle&) = delete;
    vf_engine* get() const { return e_; }

private:
    vf_engine* e_ = nullptr;
};

void emit(const Globals& g, const json& j) {
    std::cout << (g.json_out ? j.dump() : j.dump(2)) << '\n';
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> files;
            for (const auto& e : fs::directory_iterator(in)) {
                if (e.is_regular_file() && e.path().extension() == ".jsonl") {
                    files.push_back(e.path().string());
                }
            }
            std::sort(files.begin(), files.end());
            out.insert(out.end(), files.begin(), files.end());
        } else {
            out.push_back(in);
        }
    }
    if (out.empty()) {
        usage_error("empty corpus: no feature-stream files given");
    }
    return out;
}

int cmd_ingest(const Globals& g, const std::vector<std::string>& inputs) {
    json videos = json::array();
    for (const auto& path : expand_inputs(inputs)) {
        CString out;
        check(vf_ingest_file(path.c_str(), &out.p), path);
        videos.push_back(json::parse(out.str()));
    }
    if (g.json_out) {
        emit(g, json{{"videos", videos}});
    } else {
        for (const auto& v : videos) {
            std::cout << v["video_id"].get<std::string>() << ": " << v["frames"] << " frames, "
                      << v["detections"] << " detections, " << v["identities"].size() << " identities\n";
        }
    }
    return exit_ok;
}

int cmd_build(const Globals& g, const std::vector<std::string>& inputs) {
    EngineHandle engine(g);
    if (inputs.empty()) {
        usage_error("empty corpus: no feature-stream files given");
    }
    for (const auto& path : expand_inputs(inputs)) {
        check(vf_engine_add_stream_file(engine.get(), path.c_str()), path);
    }
    CString stats;
    check(vf_engine_build(engine.get(), &stats.p), "build");
    CString violations;
    check(vf_engine_validate(engine.get(), &violations.p), "validate");
    json v = json::parse(violations.str());
    if (!v["violations"].empty()) {
        std::cerr << "error: built forest failed validation: " << v["violations"].dump() << '\n';
        return exit_internal;
    }
    std::string forest_path = resolved_config(g)["paths.forest"].get<std::string>();
    check(vf_engine_save_forest(engine.get(), forest_path.c_str()), forest_path);
    json s = json::parse(stats.str());
    s["forest"] = forest_path;
    if (g.json_out) {
        emit(g, s);
    } else {
        for (const auto& vid : s["videos"]) {
            std::cout << vid["video_id"].get<std::string>() << ": " << vid["segments"] << " segments, "
                      << vid["nodes"] << " nodes, height " << vid["height"] << '\n';
        }
        std::cout << "wrote " << forest_path << '\n';
    }
    return exit_ok;
}

void load_state(const Globals& g, const EngineHandle& engine, const json& cfg) {
    std::string forest_path = cfg["paths.forest"].get<std::string>();
    if (!fs::exists(forest_path)) {
        usage_error("forest file " + forest_path + " does not exist; run build first");
    }
    check(vf_engine_load_forest(engine.get(), forest_path.c_str()), forest_path);
    std::string kb_path = cfg["paths.kb"].get<std::string>();
    check(vf_engine_load_kb(engine.get(), kb_path.c_str(), 1), kb_path);
    (void)g;
}

int cmd_query(const Globals& g, const std::string& file, const std::string& text) {
    if (file.empty() == text.empty()) {
        usage_error("query needs exactly one of --file or --text");
    }
    std::string raw = file.empty() ? text : read_file(file);
    EngineHandle engine(g);
    json cfg = resolved_config(g);
    load_state(g, engine, cfg);
    CString out;
    check(vf_engine_query(engine.get(), raw.c_str(), g.trace ? 1 : 0, &out.p), "query");
    std::string kb_path = cfg["paths.kb"].get<std::string>();
    check(vf_engine_save_kb(engine.get(), kb_path.c_str()), kb_path);
    json answer = json::parse(out.str());
    if (g.trace) {
        for (const auto& s : answer["stages"]) {
            if (g.json_out) {
                std::cerr << s.dump() << '\n';
                continue;
            }
            std::cerr << "stage " << s["stage"] << " " << s["name"].get<std::string>() << ": "
                      << s["status"].get<std::string>() << " " << s["detail"].get<std::string>() << '\n';
        }
    }
    emit(g, answer);
    return exit_ok;
}

int cmd_search(const Globals& g, const std::string& text, const std::vector<std::string>& identities,
               const std::string& video) {
    EngineHandle engine(g);
    json cfg = resolved_config(g);
    load_state(g, engine, cfg);
    std::string ids = json(identities).dump();
    CString out;
    check(vf_engine_search(engine.get(), text.c_str(), ids.c_str(), video.empty() ? nullptr : video.c_str(),
                           &out.p),
          "search");
    json r = json::parse(out.str());
    if (g.trace) {
        for (const auto& res : r["results"]) {
            for (const auto& t : res["trace"]) {
                std::cout << t.dump() << '\n';
            }
        }
        return exit_ok;
    }
    if (g.json_out) {
        for (auto& res : r["results"]) {
            res.erase("trace");
        }
        emit(g, r);
        return exit_ok;
    }
    for (const auto& res : r["results"]) {
        for (const auto& h : res["hits"]) {
            std::printf("%s node %d depth %d [%.3f, %.3f) relevance %.4f%s\n",
                        h["video_id"].get<std::string>().c_str(), h["node"].get<int>(), h["depth"].get<int>(),
                        h["interval"][0].get<double>(), h["interval"][1].get<double>(),
                        h["relevance"].get<double>(), h["fallback"].get<bool>() ? " (fallback)" : "");
        }
    }
    return exit_ok;
}

int cmd_kb(const Globals& g, const std::string& action, const std::string& date, const std::string& location,
           const std::string& description) {
    EngineHandle engine(g);
    json cfg = resolved_config(g);
    std::string kb_path = cfg["paths.kb"].get<std::string>();
    if (action == "show") {
        check(vf_engine_load_kb(engine.get(), kb_path.c_str(), 1), kb_path);
        CString out;
        check(vf_engine_kb_show(engine.get(), &out.p), "kb show");
        json kb = json::parse(out.str());
        if (g.json_out) {
            emit(g, kb);
        } else {
            for (const auto& e : kb["entries"]) {
                std::cout << e["d"].get<std::string>() << "  " << e["l"].get<std::string>() << "  c=" << e["c"]
                          << (e["priority"].get<bool>() ? "*" : "") << "  " << e["s"].get<std::string>() << '\n';
            }
        }
        return exit_ok;
    }
    if (action == "upsert") {
        if (date.empty() || location.empty() || description.empty()) {
            usage_error("kb upsert needs --date, --location and --description");
        }
        check(vf_engine_load_kb(engine.get(), kb_path.c_str(), 1), kb_path);
        CString outcome;
        check(vf_engine_kb_upsert(engine.get(), date.c_str(), location.c_str(), description.c_str(), &outcome.p),
              "kb upsert");
        check(vf_engine_save_kb(engine.get(), kb_path.c_str()), kb_path);
        if (g.json_out) {
            emit(g, json{{"outcome", outcome.str()}});
        } else {
            std::cout << outcome.str() << '\n';
        }
        return exit_ok;
    }
    check(vf_engine_load_kb(engine.get(), kb_path.c_str(), 0), kb_path);
    check(vf_engine_save_kb(engine.get(), kb_path.c_str()), kb_path);
    if (g.json_out) {
        emit(g, json{{"compacted", kb_path}});
    } else {
        std::cout << "compacted " << kb_path << '\n';
    }
    return exit_ok;
}

int cmd_synth(const Globals& g, const std::string& spec, const std::string& out_dir) {
    std::string spec_text = spec.empty() ? std::string() : read_file(spec);
    CString out;
    check(vf_synth(spec.empty() ? nullptr : spec_text.c_str(), g.seed.value_or(7), out_dir.c_str(), &out.p),
          "synth");
    json r = json::parse(out.str());
    if (g.json_out) {
        emit(g, r);
    } else {
        std::cout << "wrote " << r["videos"].size() << " streams and " << r["queries"] << " queries to " << out_dir
                  << '\n';
    }
    return exit_ok;
}

int cmd_eval(const Globals& g, const std::string& queries_path, bool ablations) {
    std::string queries = read_file(queries_path);
    EngineHandle engine(g);
    json cfg = resolved_config(g);
    load_state(g, engine, cfg);
    CString out_json;
    CString out_text;
    check(vf_engine_eval(engine.get(), queries.c_str(), ablations ? 1 : 0, &out_json.p, &out_text.p), "eval");
    json report = json::parse(out_json.str());
    if (g.json_out) {
        emit(g, report);
    } else {
        std::cout << out_text.str();
    }
    if (g.trace) {
        for (const auto& row : report["rows"]) {
            for (const auto& f : row["failures"]) {
                std::cerr << row["label"].get<std::string>() << ": " << f.get<std::string>() << '\n';
            }
        }
    }
    return exit_ok;
}

int cmd_config(const Globals& g) {
    json cfg = resolved_config(g);
    if (g.json_out) {
        emit(g, cfg);
    } else {
        for (const auto& [k, v] : cfg.items()) {
            std::cout << k << " = " << v.get<std::string>() << '\n';
        }
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-video indexing and question answering"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", vf_version());

    Globals g;
    app.add_option("--config", g.config_path, "Config file (falls back to $ENGINE_CONFIG)");
    app.add_flag("--json", g.json_out, "Compact JSON on standard output");
    app.add_flag("--trace", g.trace, "Emit search and stage traces");
    app.add_option("--provider", g.provider, "mock, an http(s):// URL, or a provider command line");
    app.add_option("--tau-rel", g.tau_rel, "Relevance threshold")->check(CLI::Range(0.0, 1.0));
    app.add_flag("--no-reid", g.no_reid, "Disable identity pruning in search");
    app.add_flag("--no-filter", g.no_filter, "Disable metadata video filtering");
    app.add_option("--max-depth", g.max_depth, "Deepest tree level searched (integer or none)");
    app.add_flag("--leaf-fallback", g.leaf_fallback, "Return the best leaf when nothing passes the threshold");
    app.add_option("--seed", g.seed, "Scenario seed for synth, mock provider seed otherwise");
    app.add_option("--forest", g.forest_path, "Forest file (paths.forest)");
    app.add_option("--kb", g.kb_path, "Knowledge-base file (paths.kb)");
    app.add_option("--set", g.sets, "Override any config key, key=value");

    std::vector<std::string> inputs;
    auto* ingest = app.add_subcommand("ingest", "Validate feature-stream files");
    ingest->add_option("inputs", inputs, "Stream files or directories")->required();

    auto* build = app.add_subcommand("build", "Build and save the forest");
    build->add_option("inputs", inputs, "Stream files or directories");

    std::string query_file;
    std::string query_text;
    auto* query = app.add_subcommand("query", "Answer a question");
    query->add_option("--file", query_file, "Structured query document");
    query->add_option("--text", query_text, "Natural-language question");

    std::string search_text;
    std::vector<std::string> search_ids;
    std::string search_video;
    auto* search = app.add_subcommand("search", "Threshold search over every tree");
    search->add_option("--text", search_text, "Query text")->required();
    search->add_option("--identity", search_ids, "Required identity (repeatable)");
    search->add_option("--video", search_video, "Restrict to one video id");

    std::string kb_action;
    std::string kb_date;
    std::string kb_location;
    std::string kb_description;
    auto* kb = app.add_subcommand("kb", "Inspect or edit the knowledge base");
    kb->add_option("action", kb_action, "show | upsert | compact")
        ->required()
        ->check(CLI::IsMember({"show", "upsert", "compact"}));
    kb->add_option("--date", kb_date, "YYYY-MM-DD");
    kb->add_option("--location", kb_location);
    kb->add_option("--description", kb_description);

    std::string synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario with ground truth");
    synth->add_option("--spec", synth_spec, "Scenario spec JSON (default: built-in scenario)");
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string eval_queries;
    bool no_ablations = false;
    auto* eval = app.add_subcommand("eval", "Score a query set per modality with ablation rows");
    eval->add_option("--queries", eval_queries, "Query set with answer keys")->required();
    eval->add_flag("--no-ablations", no_ablations, "Only the default row");

    auto* config = app.add_subcommand("config", "Print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    try {
        if (*ingest) return cmd_ingest(g, inputs);
        if (*build) return cmd_build(g, inputs);
        if (*query) return cmd_query(g, query_file, query_text);
        if (*search) return cmd_search(g, search_text, search_ids, search_video);
        if (*kb) return cmd_kb(g, kb_action, kb_date, kb_location, kb_description);
        if (*synth) return cmd_synth(g, synth_spec, synth_out);
        if (*eval) return cmd_eval(g, eval_queries, !no_ablations);
        if (*config) return cmd_config(g);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return exit_code_of(f.status);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_validation;
}
