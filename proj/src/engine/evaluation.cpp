#include "vforest/engine.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace vforest {

namespace {

using json = nlohmann::json;

constexpr double interval_tolerance = 1e-9;

std::set<std::string> string_set(const json& j) {
    std::set<std::string> out;
    if (j.is_array()) {
        for (const auto& v : j) {
            out.insert(v.get<std::string>());
        }
    }
    return out;
}

std::set<std::string> payload_video_ids(const json& payload) {
    std::set<std::string> out;
    for (const auto& v : payload.value("videos", json::array())) {
        out.insert(v.at("video_id").get<std::string>());
    }
    return out;
}

bool locate_matches(const json& payload, const json& expected) {
    const json& windows = expected.at("videos");
    std::set<std::string> want;
    for (const auto& [vid, _] : windows.items()) {
        want.insert(vid);
    }
    if (payload_video_ids(payload) != want) {
        return false;
    }
    for (const auto& v : payload.at("videos")) {
        const json& w = windows.at(v.at("video_id").get<std::string>());
        for (const auto& iv : v.at("intervals")) {
            double a = iv.at(0).get<double>();
            double b = iv.at(1).get<double>();
            bool inside = std::any_of(w.begin(), w.end(), [&](const json& win) {
                return a >= win.at(0).get<double>() - interval_tolerance &&
                       b <= win.at(1).get<double>() + interval_tolerance;
            });
            if (!inside) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

std::vector<EvalQuery> eval_queries_from_json(const json& doc) {
    std::vector<EvalQuery> out;
    if (!doc.is_object() || !doc.contains("queries") || !doc["queries"].is_array()) {
        throw Error(ErrorCode::validation, "query set must be an object with a \"queries\" array");
    }
    for (const auto& q : doc["queries"]) {
        EvalQuery e;
        try {
            e.id = q.at("id").get<std::string>();
            e.query = StructuredQuery::from_json(q.at("query"));
            auto m = modality_from_string(q.value("modality", std::string()));
            if (!m && !e.query.modality) {
                throw Error(ErrorCode::validation, "query " + e.id + " has no modality");
            }
            e.modality = m ? *m : *e.query.modality;
            e.expected = q.at("expected");
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::validation, std::string("query set entry: ") + ex.what());
        }
        out.push_back(std::move(e));
    }
    return out;
}

bool answer_matches(const StructuredQuery& query, const Answer& answer, const json& expected) {
    const json& p = answer.payload;
    try {
        switch (query.task) {
        case Task::presence:
            return p.value("present", false) == expected.at("present").get<bool>();
        case Task::locate:
            return locate_matches(p, expected);
        case Task::common_identity:
            return string_set(p.value("identities", json())) == string_set(expected.at("identities"));
        case Task::count:
            return p.value("count", std::size_t{0}) == expected.at("count").get<std::size_t>() &&
                   string_set(p.value("identities", json())) == string_set(expected.at("identities"));
        case Task::summarize:
            return payload_video_ids(p) == string_set(expected.at("videos")) &&
                   string_set(p.value("identities", json())) == string_set(expected.at("identities"));
        }
    } catch (const json::exception&) {
        return false;
    }
    return false;
}

EvalRow evaluate_row(const std::string& label, const Forest& forest, const std::vector<EvalQuery>& queries,
                     Provider& provider, const KnowledgeBase& kb, const PipelineOptions& options) {
    EvalRow row;
    row.label = label;
    for (Modality m : all_modalities) {
        row.by_modality[m];
    }
    KnowledgeBase local = kb;
    auto start = std::chrono::steady_clock::now();
    for (const auto& q : queries) {
        Score& s = row.by_modality[q.modality];
        ++s.total;
        ++row.overall.total;
        try {
            Answer a = answer_query(q.query, forest, local, provider, options);
            row.provider_calls += a.provider_calls;
            if (answer_matches(q.query, a, q.expected)) {
                ++s.correct;
                ++row.overall.correct;
            } else {
                row.failures.push_back(q.id);
            }
        } catch (const Error& e) {
            ++row.errors;
            row.failures.push_back(q.id + " (" + e.what() + ")");
        }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

EvalReport evaluate(const Forest& forest, const std::vector<EvalQuery>& queries, Provider& provider,
                    const KnowledgeBase& kb, const PipelineOptions& options, bool ablations, int shallow_depth) {
    EvalReport report;
    report.rows.push_back(evaluate_row("default", forest, queries, provider, kb, options));
    if (ablations) {
        PipelineOptions no_reid = options;
        no_reid.search.use_reid = false;
        report.rows.push_back(evaluate_row(ablation_no_reid, forest, queries, provider, kb, no_reid));

        PipelineOptions no_filter = options;
        no_filter.use_filter = false;
        report.rows.push_back(evaluate_row(ablation_no_filter, forest, queries, provider, kb, no_filter));

        PipelineOptions shallow = options;
        shallow.search.max_depth = shallow_depth;
        report.rows.push_back(evaluate_row(ablation_shallow, forest, queries, provider, kb, shallow));
    }
    return report;
}

json EvalReport::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        json by = json::object();
        for (const auto& [m, s] : r.by_modality) {
            by[to_string(m)] = {{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
        }
        rows_json.push_back({{"label", r.label},
                             {"modalities", std::move(by)},
                             {"overall", {{"correct", r.overall.correct}, {"total", r.overall.total},
                                          {"accuracy", r.overall.accuracy()}}},
                             {"errors", r.errors},
                             {"provider_calls", r.provider_calls},
                             {"seconds", r.seconds},
                             {"failures", r.failures}});
    }
    return {{"rows", std::move(rows_json)}};
}

std::string EvalReport::to_text() const {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-26s %9s %9s %9s %9s %9s %6s\n", "row", "single", "spatial", "temporal",
                  "spatiotmp", "overall", "errors");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-26s", r.label.c_str());
        out += buf;
        for (Modality m : all_modalities) {
            auto it = r.by_modality.find(m);
            double acc = it == r.by_modality.end() ? 0.0 : it->second.accuracy();
            std::snprintf(buf, sizeof buf, " %8.1f%%", 100.0 * acc);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, " %8.1f%% %6zu\n", 100.0 * r.overall.accuracy(), r.errors);
        out += buf;
    }
    return out;
}

} // namespace vforest
