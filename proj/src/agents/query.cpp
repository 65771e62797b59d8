#include "vforest/agents.hpp"

#include "vforest/error.hpp"

#include <array>
#include <utility>

namespace vforest {

namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<Task, const char*>, 5> task_names{{
    {Task::locate, "locate"},
    {Task::presence, "presence"},
    {Task::common_identity, "common_identity"},
    {Task::count, "count"},
    {Task::summarize, "summarize"},
}};

constexpr std::array<std::pair<Modality, const char*>, 4> modality_names{{
    {Modality::single, "single"},
    {Modality::cross_spatial, "cross_spatial"},
    {Modality::cross_temporal, "cross_temporal"},
    {Modality::cross_spatiotemporal, "cross_spatiotemporal"},
}};

[[noreturn]] void bad_query(const std::string& why) {
    throw Error(ErrorCode::parse, "invalid query: " + why);
}

std::set<std::string> string_set(const json& j, const char* field) {
    if (!j.is_array()) {
        bad_query(std::string(field) + " must be an array of strings");
    }
    std::set<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string() || v.get<std::string>().empty()) {
            bad_query(std::string(field) + " must hold nonempty strings");
        }
        out.insert(v.get<std::string>());
    }
    return out;
}

Date date_field(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string()) {
        bad_query(std::string("date_range.") + field + " must be a date string");
    }
    auto d = Date::try_parse(j[field].get<std::string>());
    if (!d) {
        bad_query(std::string("date_range.") + field + " is not a YYYY-MM-DD date");
    }
    return *d;
}

json hit_json(const SearchHit& h) {
    json j;
    j["kind"] = "node";
    j["video_id"] = h.video_id;
    j["node"] = h.node;
    j["depth"] = h.depth;
    j["interval"] = {h.t_start, h.t_end};
    j["relevance"] = h.relevance;
    j["fallback"] = h.fallback;
    j["text"] = h.text ? json(*h.text) : json();
    return j;
}

json kb_json(const KBEntry& e) {
    return {{"kind", "kb"}, {"d", e.date.to_string()}, {"l", e.location}, {"s", e.description}, {"c", e.confidence}};
}

} // namespace

const char* to_string(Task task) noexcept {
    for (const auto& [t, name] : task_names) {
        if (t == task) {
            return name;
        }
    }
    return "unknown";
}

const char* to_string(Modality modality) noexcept {
    for (const auto& [m, name] : modality_names) {
        if (m == modality) {
            return name;
        }
    }
    return "unknown";
}

std::optional<Task> task_from_string(std::string_view s) noexcept {
    for (const auto& [t, name] : task_names) {
        if (s == name) {
            return t;
        }
    }
    return std::nullopt;
}

std::optional<Modality> modality_from_string(std::string_view s) noexcept {
    for (const auto& [m, name] : modality_names) {
        if (s == name) {
            return m;
        }
    }
    return std::nullopt;
}

StructuredQuery StructuredQuery::from_json(const json& doc) {
    if (!doc.is_object()) {
        bad_query("document must be an object");
    }
    StructuredQuery q;
    if (!doc.contains("task") || !doc["task"].is_string()) {
        bad_query("missing task");
    }
    auto task = task_from_string(doc["task"].get<std::string>());
    if (!task) {
        bad_query("unknown task \"" + doc["task"].get<std::string>() + "\"");
    }
    q.task = *task;
    for (const auto& [key, _] : doc.items()) {
        if (key != "task" && key != "identities" && key != "locations" && key != "date_range" &&
            key != "description" && key != "modality") {
            bad_query("unknown field \"" + key + "\"");
        }
    }
    if (auto it = doc.find("identities"); it != doc.end() && !it->is_null()) {
        q.identities = string_set(*it, "identities");
    }
    if (auto it = doc.find("locations"); it != doc.end() && !it->is_null()) {
        q.locations = string_set(*it, "locations");
    }
    if (auto it = doc.find("date_range"); it != doc.end() && !it->is_null()) {
        if (!it->is_object()) {
            bad_query("date_range must be an object");
        }
        DateRange r{date_field(*it, "from"), date_field(*it, "to")};
        if (r.to < r.from) {
            bad_query("date_range ends before it starts");
        }
        q.date_range = r;
    }
    if (auto it = doc.find("description"); it != doc.end() && !it->is_null()) {
        if (!it->is_string()) {
            bad_query("description must be a string");
        }
        q.description = it->get<std::string>();
    }
    if (auto it = doc.find("modality"); it != doc.end() && !it->is_null()) {
        auto m = it->is_string() ? modality_from_string(it->get<std::string>()) : std::nullopt;
        if (!m) {
            bad_query("unknown modality " + it->dump());
        }
        q.modality = m;
    }
    bool has_ids = q.identities && !q.identities->empty();
    if (q.description.empty() && !has_ids) {
        bad_query("needs a description or identities");
    }
    if ((q.task == Task::presence || q.task == Task::locate) && !has_ids) {
        bad_query(std::string(to_string(q.task)) + " needs at least one identity");
    }
    return q;
}

StructuredQuery StructuredQuery::parse(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("query is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

json StructuredQuery::to_json() const {
    json j;
    j["task"] = vforest::to_string(task);
    if (identities) {
        j["identities"] = *identities;
    }
    if (locations) {
        j["locations"] = *locations;
    }
    if (date_range) {
        j["date_range"] = {{"from", date_range->from.to_string()}, {"to", date_range->to.to_string()}};
    }
    if (!description.empty()) {
        j["description"] = description;
    }
    if (modality) {
        j["modality"] = vforest::to_string(*modality);
    }
    return j;
}

std::string StructuredQuery::query_text() const {
    if (!description.empty()) {
        return description;
    }
    std::string out;
    for (const auto& id : identities.value_or(IdentitySet{})) {
        out += (out.empty() ? "person " : ", ") + id;
    }
    return out;
}

json Answer::to_json(bool include_trace) const {
    json j;
    j["task"] = vforest::to_string(task);
    j["text"] = text;
    j["payload"] = payload;
    json evidence = json::array();
    for (const auto& h : hits) {
        evidence.push_back(hit_json(h));
    }
    for (const auto& e : kb_evidence) {
        evidence.push_back(kb_json(e));
    }
    j["evidence"] = std::move(evidence);
    json facts = json::array();
    for (const auto& e : derived_facts) {
        facts.push_back({{"d", e.date.to_string()}, {"l", e.location}, {"s", e.description}});
    }
    j["derived_facts"] = std::move(facts);
    json stages_json = json::array();
    for (const auto& s : stages) {
        stages_json.push_back({{"stage", s.index}, {"name", s.name}, {"status", s.status}, {"detail", s.detail}});
    }
    j["stages"] = std::move(stages_json);
    j["short_circuit"] = short_circuit;
    j["provider_calls"] = provider_calls;
    if (include_trace) {
        json t = json::array();
        for (const auto& e : trace) {
            t.push_back({{"video_id", e.video_id}, {"node", e.node}, {"depth", e.depth}, {"relevance", e.relevance}});
        }
        j["trace"] = std::move(t);
    }
    return j;
}

std::string presence_fact(const Identity& id) {
    return "person " + id + " present";
}

} // namespace vforest
