#include "vforest/config.hpp"

#include "vforest/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vforest {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw Error(ErrorCode::validation,
                "config key " + std::string(key) + ": \"" + std::string(value) + "\" is not " + expected);
}

double to_double(std::string_view key, std::string_view v) {
    std::string s(v);
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        bad_value(key, v, "a number");
    }
    return d;
}

long long to_integer(std::string_view key, std::string_view v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        bad_value(key, v, "an integer");
    }
    return out;
}

std::size_t to_count(std::string_view key, std::string_view v) {
    long long n = to_integer(key, v);
    if (n < 0) {
        bad_value(key, v, "a nonnegative integer");
    }
    return static_cast<std::size_t>(n);
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true") {
        return true;
    }
    if (v == "false") {
        return false;
    }
    bad_value(key, v, "true or false");
}

std::string format_double(double d) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

// Strips surrounding quotes and a trailing comment.
std::string file_value(std::string_view raw) {
    std::string v = trim(raw);
    if (!v.empty() && v.front() == '"') {
        auto close = v.find('"', 1);
        if (close == std::string::npos) {
            throw Error(ErrorCode::validation, "unterminated string");
        }
        return v.substr(1, close - 1);
    }
    auto hash = v.find('#');
    if (hash != std::string::npos) {
        v = trim(v.substr(0, hash));
    }
    return v;
}

} // namespace

const std::vector<std::string>& EngineConfig::keys() {
    static const std::vector<std::string> k{
        "segmenter.eps1",   "segmenter.eps2",      "segmenter.delta_p",      "segmenter.auto_calibrate",
        "forest.fanout",    "forest.threads",      "search.tau_rel",         "search.use_reid",
        "search.max_depth", "search.leaf_fallback", "agents.use_filter",     "agents.leaf_fallback",
        "agents.max_kb_evidence", "kb.c_max",      "kb.tau_sim",             "kb.tau_conf",
        "provider.mode",    "provider.address",    "provider.dim",           "provider.seed",
        "provider.max_concurrency", "paths.forest", "paths.kb",
    };
    return k;
}

void EngineConfig::set(std::string_view key, std::string_view value) {
    if (key == "segmenter.eps1" || key == "segmenter.eps2") {
        std::optional<double> v;
        if (value != "auto") {
            v = to_double(key, value);
        }
        (key == "segmenter.eps1" ? segmenter.eps1 : segmenter.eps2) = v;
    } else if (key == "segmenter.delta_p") {
        segmenter.delta_p = to_count(key, value);
    } else if (key == "segmenter.auto_calibrate") {
        segmenter.auto_calibrate = to_bool(key, value);
    } else if (key == "forest.fanout") {
        fanout = to_count(key, value);
    } else if (key == "forest.threads") {
        build_threads = to_count(key, value);
    } else if (key == "search.tau_rel") {
        search.tau_rel = to_double(key, value);
    } else if (key == "search.use_reid") {
        search.use_reid = to_bool(key, value);
    } else if (key == "search.max_depth") {
        if (value == "none") {
            search.max_depth.reset();
        } else {
            search.max_depth = static_cast<int>(to_integer(key, value));
        }
    } else if (key == "search.leaf_fallback") {
        search.leaf_fallback = to_bool(key, value);
    } else if (key == "agents.use_filter") {
        use_filter = to_bool(key, value);
    } else if (key == "agents.leaf_fallback") {
        agents_leaf_fallback = to_bool(key, value);
    } else if (key == "agents.max_kb_evidence") {
        max_kb_evidence = to_count(key, value);
    } else if (key == "kb.c_max") {
        kb.c_max = static_cast<int>(to_integer(key, value));
    } else if (key == "kb.tau_sim") {
        kb.tau_sim = to_double(key, value);
    } else if (key == "kb.tau_conf") {
        kb.tau_conf = static_cast<int>(to_integer(key, value));
    } else if (key == "provider.mode") {
        if (value != "mock" && value != "subprocess" && value != "http") {
            bad_value(key, value, "one of mock, subprocess, http");
        }
        provider.mode = value;
    } else if (key == "provider.address") {
        provider.address = value;
    } else if (key == "provider.dim") {
        provider.dim = to_count(key, value);
    } else if (key == "provider.seed") {
        provider.seed = static_cast<std::uint64_t>(to_count(key, value));
    } else if (key == "provider.max_concurrency") {
        provider.max_concurrency = to_count(key, value);
    } else if (key == "paths.forest") {
        forest_path = value;
    } else if (key == "paths.kb") {
        kb_path = value;
    } else {
        throw Error(ErrorCode::validation, "unknown config key \"" + std::string(key) + "\"");
    }
}

std::string EngineConfig::get(std::string_view key) const {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("auto"); };
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    if (key == "segmenter.eps1") return opt(segmenter.eps1);
    if (key == "segmenter.eps2") return opt(segmenter.eps2);
    if (key == "segmenter.delta_p") return std::to_string(segmenter.delta_p);
    if (key == "segmenter.auto_calibrate") return b(segmenter.auto_calibrate);
    if (key == "forest.fanout") return std::to_string(fanout);
    if (key == "forest.threads") return std::to_string(build_threads);
    if (key == "search.tau_rel") return format_double(search.tau_rel);
    if (key == "search.use_reid") return b(search.use_reid);
    if (key == "search.max_depth") return search.max_depth ? std::to_string(*search.max_depth) : "none";
    if (key == "search.leaf_fallback") return b(search.leaf_fallback);
    if (key == "agents.use_filter") return b(use_filter);
    if (key == "agents.leaf_fallback") return b(agents_leaf_fallback);
    if (key == "agents.max_kb_evidence") return std::to_string(max_kb_evidence);
    if (key == "kb.c_max") return std::to_string(kb.c_max);
    if (key == "kb.tau_sim") return format_double(kb.tau_sim);
    if (key == "kb.tau_conf") return std::to_string(kb.tau_conf);
    if (key == "provider.mode") return provider.mode;
    if (key == "provider.address") return provider.address;
    if (key == "provider.dim") return std::to_string(provider.dim);
    if (key == "provider.seed") return std::to_string(provider.seed);
    if (key == "provider.max_concurrency") return std::to_string(provider.max_concurrency);
    if (key == "paths.forest") return forest_path;
    if (key == "paths.kb") return kb_path;
    throw Error(ErrorCode::validation, "unknown config key \"" + std::string(key) + "\"");
}

void EngineConfig::apply_file_text(std::string_view text, const std::string& source) {
    std::istringstream in{std::string(text)};
    std::string section;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw Error(ErrorCode::validation, where() + "malformed section header");
            }
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::validation, where() + "expected key = value");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (section.empty()) {
            throw Error(ErrorCode::validation, where() + "key " + key + " outside a section");
        }
        try {
            set(section + "." + key, file_value(std::string_view(t).substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(ErrorCode::validation, where() + e.what());
        }
    }
}

void EngineConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::validation, "cannot read config file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_file_text(buf.str(), path);
}

void EngineConfig::validate() const {
    SegmenterConfig probe;
    probe.eps1 = segmenter.eps1.value_or(0.0);
    probe.eps2 = segmenter.eps2.value_or(0.0);
    probe.delta_p = segmenter.delta_p;
    probe.validate();
    if (fanout < 2) {
        throw Error(ErrorCode::validation, "forest.fanout must be >= 2");
    }
    search.validate();
    kb.validate();
    if (provider.mode != "mock" && provider.address.empty()) {
        throw Error(ErrorCode::validation, "provider.address is required for provider mode " + provider.mode);
    }
}

nlohmann::json EngineConfig::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : keys()) {
        j[k] = get(k);
    }
    return nlohmann::json::parse(j.dump());
}

PipelineOptions EngineConfig::pipeline_options() const {
    PipelineOptions p;
    p.search = search;
    p.search.leaf_fallback = agents_leaf_fallback;
    p.use_filter = use_filter;
    p.max_kb_evidence = max_kb_evidence;
    return p;
}

EngineConfig resolve_config(const std::optional<std::string>& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    EngineConfig cfg;
    std::optional<std::string> file = path;
    if (!file) {
        if (const char* env = std::getenv("ENGINE_CONFIG"); env && *env) {
            file = env;
        }
    }
    if (file) {
        cfg.apply_file(*file);
    }
    for (const auto& [k, v] : overrides) {
        cfg.set(k, v);
    }
    cfg.validate();
    return cfg;
}

} // namespace vforest
