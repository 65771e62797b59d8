#include "vforest/testkit.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

namespace vforest::testkit {

namespace {

using json = nlohmann::json;

// Portable draws on top of mt19937_64 so outputs do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) {
            u1 = 0x1.0p-53;
        }
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    Embedding unit_vector(std::size_t dim) {
        Embedding v(dim);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (auto& x : v) {
                x = normal();
                norm += x * x;
            }
        }
        norm = std::sqrt(norm);
        for (auto& x : v) {
            x /= norm;
        }
        return v;
    }

private:
    std::mt19937_64 gen_;
};

constexpr double jitter_max = 0.01;

double distance(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

std::string join_locations(const std::vector<std::string>& locs) {
    std::string out;
    for (std::size_t i = 0; i < locs.size(); ++i) {
        if (i > 0) {
            out += i + 1 == locs.size() ? " and " : ", ";
        }
        out += locs[i];
    }
    return out;
}

std::string date_phrase(const Date& from, const Date& to) {
    return from == to ? "on " + from.to_string() : "on " + from.to_string() + " to " + to.to_string();
}

json interval_json(double a, double b) {
    return json::array({a, b});
}

// Cameras in scope: location in locs and date within [from, to].
std::vector<std::size_t> scope_cameras(const std::vector<CameraTruth>& cams, const std::set<std::string>& locs,
                                       const Date& from, const Date& to) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        if (locs.count(cams[i].location) && from <= cams[i].date && cams[i].date <= to) {
            out.push_back(i);
        }
    }
    return out;
}

struct Scope {
    std::string modality;
    std::vector<std::string> locations;  // in phrase order
    Date from;
    Date to;
};

struct QueryBuilder {
    const GroundTruthManifest& truth;
    std::vector<GeneratedQuery>& out;
    double fps;

    void add(const Scope& s, const std::string& task, const std::optional<Identity>& id, const std::string& text) {
        std::set<std::string> locs(s.locations.begin(), s.locations.end());
        json q;
        q["task"] = task;
        if (id) {
            q["identities"] = json::array({*id});
        }
        q["locations"] = s.locations;
        q["date_range"] = {{"from", s.from.to_string()}, {"to", s.to.to_string()}};
        q["description"] = text;
        q["modality"] = s.modality;

        auto cams = scope_cameras(truth.cameras, locs, s.from, s.to);
        json expected;
        if (task == "presence") {
            bool present = false;
            for (auto c : cams) {
                present = present || truth.cameras[c].identities.count(*id) > 0;
            }
            expected["present"] = present;
        } else if (task == "locate") {
            json videos = json::object();
            auto it = truth.appearances.find(*id);
            for (auto c : cams) {
                const auto& vid = truth.cameras[c].video_id;
                if (it == truth.appearances.end()) {
                    continue;
                }
                for (const auto& iv : it->second) {
                    if (iv.video_id == vid) {
                        videos[vid].push_back(interval_json(iv.first_ts, iv.end_ts));
                    }
                }
            }
            expected["videos"] = std::move(videos);
        } else if (task == "count" || task == "summarize") {
            IdentitySet all;
            std::vector<std::string> vids;
            for (auto c : cams) {
                all.insert(truth.cameras[c].identities.begin(), truth.cameras[c].identities.end());
                vids.push_back(truth.cameras[c].video_id);
            }
            if (task == "count") {
                expected["count"] = all.size();
            } else {
                std::sort(vids.begin(), vids.end());
                expected["videos"] = vids;
            }
            expected["identities"] = all;
        } else if (task == "common_identity") {
            IdentitySet common;
            for (std::size_t k = 0; k < cams.size(); ++k) {
                const auto& ids = truth.cameras[cams[k]].identities;
                if (k == 0) {
                    common = ids;
                } else {
                    IdentitySet next;
                    std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(),
                                          std::inserter(next, next.end()));
                    common = std::move(next);
                }
            }
            expected["identities"] = common;
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "q%03zu", out.size() + 1);
        out.push_back({buf, s.modality, std::move(q), std::move(expected)});
    }
};

std::vector<GeneratedQuery> make_queries(const ScenarioSpec& spec, const GroundTruthManifest& truth) {
    std::vector<GeneratedQuery> out;
    QueryBuilder qb{truth, out, spec.fps};

    std::vector<std::string> locations;
    std::vector<Date> dates;
    for (const auto& c : spec.cameras) {
        if (std::find(locations.begin(), locations.end(), c.location) == locations.end()) {
            locations.push_back(c.location);
        }
        if (std::find(dates.begin(), dates.end(), c.date) == dates.end()) {
            dates.push_back(c.date);
        }
    }
    std::sort(dates.begin(), dates.end());

    std::vector<Scope> scopes;
    for (const auto& c : spec.cameras) {
        scopes.push_back({"single", {c.location}, c.date, c.date});
    }
    if (locations.size() > 1) {
        for (const auto& d : dates) {
            scopes.push_back({"cross_spatial", locations, d, d});
            scopes.push_back({"cross_spatial", {locations[0], locations[1]}, d, d});
        }
    }
    if (dates.size() > 1) {
        for (const auto& l : locations) {
            scopes.push_back({"cross_temporal", {l}, dates.front(), dates.back()});
        }
    }
    if (locations.size() > 1 && dates.size() > 1) {
        scopes.push_back({"cross_spatiotemporal", locations, dates.front(), dates.back()});
        for (std::size_t i = 1; i < locations.size(); ++i) {
            scopes.push_back({"cross_spatiotemporal", {locations[i - 1], locations[i]}, dates.front(), dates.back()});
        }
    }

    std::vector<Identity> planted;
    for (const auto& e : spec.planted_events) {
        planted.push_back(e.identity);
    }
    std::vector<Identity> all_ids;
    for (const auto& [id, _] : truth.appearances) {
        all_ids.push_back(id);
    }

    std::set<std::string> summarized;
    for (std::size_t si = 0; si < scopes.size(); ++si) {
        const Scope& s = scopes[si];
        std::set<std::string> locs(s.locations.begin(), s.locations.end());
        auto cams = scope_cameras(truth.cameras, locs, s.from, s.to);
        if (cams.empty()) {
            continue;
        }
        IdentitySet in_scope;
        for (auto c : cams) {
            in_scope.insert(truth.cameras[c].identities.begin(), truth.cameras[c].identities.end());
        }
        std::vector<Identity> present, absent;
        for (const auto& id : planted) {
            (in_scope.count(id) ? present : absent).push_back(id);
        }
        for (const auto& id : all_ids) {
            if (!in_scope.count(id) && std::find(absent.begin(), absent.end(), id) == absent.end()) {
                absent.push_back(id);
            }
        }
        std::string where = join_locations(s.locations) + " " + date_phrase(s.from, s.to);
        if (!present.empty()) {
            const Identity& p = present[si % present.size()];
            qb.add(s, "presence", p, "was " + p + " present in " + where);
            const Identity& l = present[(si + 1) % present.size()];
            qb.add(s, "locate", l, "when was " + l + " in " + where);
        }
        if (!absent.empty()) {
            const Identity& a = absent[si % absent.size()];
            qb.add(s, "presence", a, "was " + a + " present in " + where);
        }
        qb.add(s, "count", std::nullopt, "how many people were in " + where);
        if (cams.size() >= 2) {
            qb.add(s, "common_identity", std::nullopt, "who appeared in " + where);
        }
        if (!summarized.count(s.modality)) {
            summarized.insert(s.modality);
            qb.add(s, "summarize", std::nullopt, "summarize " + where);
        }
    }
    return out;
}

} // namespace

void ScenarioSpec::validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::validation, "infeasible scenario: " + why); };
    if (cameras.empty()) {
        fail("no cameras");
    }
    if (dim < 2) {
        fail("dim must be >= 2");
    }
    if (!(fps > 0.0)) {
        fail("fps must be > 0");
    }
    if (!(reid_noise_rate >= 0.0 && reid_noise_rate <= 1.0)) {
        fail("reid_noise_rate must lie in [0, 1]");
    }
    std::set<std::string> ids;
    for (const auto& c : cameras) {
        if (c.video_id.empty() || !ids.insert(c.video_id).second) {
            fail("camera video ids must be unique and nonempty");
        }
        if (c.location.empty()) {
            fail("camera " + c.video_id + " has no location");
        }
        if (c.duration_frames < 2) {
            fail("camera " + c.video_id + " is shorter than two frames");
        }
        if (c.transitions.empty()) {
            fail("camera " + c.video_id + " has no embedding transition");
        }
        for (auto t : c.transitions) {
            if (t == 0 || t >= c.duration_frames) {
                fail("camera " + c.video_id + " transition " + std::to_string(t) + " outside (0, duration)");
            }
        }
    }
    for (const auto& e : planted_events) {
        if (e.identity.empty()) {
            fail("planted event without identity");
        }
        if (e.cameras.size() != e.windows.size()) {
            fail("planted event " + e.identity + " needs one window per camera");
        }
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < e.cameras.size(); ++i) {
            if (e.cameras[i] >= cameras.size()) {
                fail("planted event " + e.identity + " names an unknown camera");
            }
            if (!seen.insert(e.cameras[i]).second) {
                fail("planted event " + e.identity + " repeats a camera");
            }
            auto [a, b] = e.windows[i];
            if (a > b || b >= cameras[e.cameras[i]].duration_frames) {
                fail("planted event " + e.identity + " exceeds the duration of " + cameras[e.cameras[i]].video_id);
            }
        }
    }
}

json ScenarioSpec::to_json() const {
    json j;
    j["seed"] = seed;
    j["identities"] = identities;
    j["dim"] = dim;
    j["fps"] = fps;
    j["reid_noise_rate"] = reid_noise_rate;
    json cams = json::array();
    for (const auto& c : cameras) {
        cams.push_back({{"video_id", c.video_id},
                        {"location", c.location},
                        {"date", c.date.to_string()},
                        {"duration_frames", c.duration_frames},
                        {"transitions", c.transitions}});
    }
    j["cameras"] = std::move(cams);
    json events = json::array();
    for (const auto& e : planted_events) {
        json w = json::array();
        for (auto [a, b] : e.windows) {
            w.push_back({a, b});
        }
        events.push_back({{"identity", e.identity}, {"cameras", e.cameras}, {"windows", w}, {"description", e.description}});
    }
    j["planted_events"] = std::move(events);
    return j;
}

ScenarioSpec ScenarioSpec::from_json(const json& doc) {
    ScenarioSpec s;
    try {
        s.seed = doc.value("seed", s.seed);
        s.identities = doc.value("identities", s.identities);
        s.dim = doc.value("dim", s.dim);
        s.fps = doc.value("fps", s.fps);
        s.reid_noise_rate = doc.value("reid_noise_rate", s.reid_noise_rate);
        for (const auto& c : doc.at("cameras")) {
            CameraSpec cs;
            cs.video_id = c.at("video_id").get<std::string>();
            cs.location = c.at("location").get<std::string>();
            cs.date = Date::parse(c.at("date").get<std::string>());
            cs.duration_frames = c.value("duration_frames", cs.duration_frames);
            cs.transitions = c.at("transitions").get<std::vector<std::size_t>>();
            s.cameras.push_back(std::move(cs));
        }
        if (doc.contains("planted_events")) {
            for (const auto& e : doc.at("planted_events")) {
                PlantedEvent pe;
                pe.identity = e.at("identity").get<std::string>();
                pe.cameras = e.at("cameras").get<std::vector<std::size_t>>();
                for (const auto& w : e.at("windows")) {
                    pe.windows.emplace_back(w.at(0).get<std::size_t>(), w.at(1).get<std::size_t>());
                }
                pe.description = e.value("description", "");
                s.planted_events.push_back(std::move(pe));
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::validation, std::string("scenario spec: ") + e.what());
    }
    s.validate();
    return s;
}

ScenarioSpec default_spec(std::uint64_t seed) {
    ScenarioSpec s;
    s.seed = seed;
    s.identities = 12;
    Rng rng(seed ^ 0x5deece66dull);
    const std::vector<std::string> locations{"Lab", "Library", "Gym"};
    const std::vector<Date> dates{Date::parse("2024-03-01"), Date::parse("2024-03-02")};
    for (const auto& d : dates) {
        for (const auto& l : locations) {
            CameraSpec c;
            c.location = l;
            c.date = d;
            c.video_id = l + "-" + d.to_string();
            std::set<std::size_t> ts;
            while (ts.size() < 3) {
                std::size_t t = rng.between(20, c.duration_frames - 20);
                bool spaced = std::all_of(ts.begin(), ts.end(), [&](std::size_t o) { return (t > o ? t - o : o - t) >= 10; });
                if (spaced) {
                    ts.insert(t);
                }
            }
            c.transitions.assign(ts.begin(), ts.end());
            s.cameras.push_back(std::move(c));
        }
    }
    // Camera indices: 0..2 first date, 3..5 second date, in location order.
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> routes{
        {"P1", {0, 1, 2}},           // all locations, first date
        {"P2", {0, 3}},              // Lab on both dates
        {"P3", {1, 5}},              // Library then Gym a day later
        {"P4", {2, 5, 3}},           // Gym twice, Lab on the second date
        {"P5", {0, 1, 2, 3, 4, 5}},  // everywhere
    };
    for (const auto& [id, cams] : routes) {
        PlantedEvent e;
        e.identity = id;
        e.cameras = cams;
        for (auto c : cams) {
            std::size_t len = rng.between(20, 50);
            std::size_t start = rng.between(5, s.cameras[c].duration_frames - len - 5);
            e.windows.emplace_back(start, start + len - 1);
        }
        e.description = id + " walks through " + std::to_string(cams.size()) + " cameras";
        s.planted_events.push_back(std::move(e));
    }
    return s;
}

json GroundTruthManifest::to_json() const {
    json j;
    json cams = json::array();
    for (const auto& c : cameras) {
        cams.push_back({{"video_id", c.video_id},
                        {"location", c.location},
                        {"date", c.date.to_string()},
                        {"frame_count", c.frame_count},
                        {"boundaries", c.boundaries},
                        {"identities", c.identities},
                        {"frame_records", c.frame_records},
                        {"detection_records", c.detection_records}});
    }
    j["cameras"] = std::move(cams);
    json app = json::object();
    for (const auto& [id, list] : appearances) {
        json arr = json::array();
        for (const auto& iv : list) {
            arr.push_back({{"video_id", iv.video_id},
                           {"frames", {iv.first_frame, iv.last_frame}},
                           {"interval", {iv.first_ts, iv.end_ts}}});
        }
        app[id] = std::move(arr);
    }
    j["appearances"] = std::move(app);
    return j;
}

Scenario generate(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Scenario out;

    // presence[c][identity] = inclusive frame windows
    std::vector<std::map<Identity, std::vector<std::pair<std::size_t, std::size_t>>>> presence(spec.cameras.size());
    for (const auto& e : spec.planted_events) {
        for (std::size_t i = 0; i < e.cameras.size(); ++i) {
            presence[e.cameras[i]][e.identity].push_back(e.windows[i]);
        }
    }
    for (std::size_t b = 0; b < spec.identities; ++b) {
        char name[16];
        std::snprintf(name, sizeof name, "B%02zu", b + 1);
        std::size_t c = rng.index(spec.cameras.size());
        std::size_t dur = spec.cameras[c].duration_frames;
        std::size_t len = std::min<std::size_t>(rng.between(15, 60), dur);
        std::size_t start = rng.between(0, dur - len);
        presence[c][name].emplace_back(start, start + len - 1);
    }
    IdentitySet alphabet;
    for (const auto& p : presence) {
        for (const auto& [id, _] : p) {
            alphabet.insert(id);
        }
    }
    std::vector<Identity> alphabet_list(alphabet.begin(), alphabet.end());

    for (std::size_t ci = 0; ci < spec.cameras.size(); ++ci) {
        const CameraSpec& cam = spec.cameras[ci];
        const std::size_t n = cam.duration_frames;
        VideoStream vs;
        vs.meta = {cam.video_id, cam.location, cam.date, spec.fps, n, spec.dim};

        std::vector<std::size_t> transitions = cam.transitions;
        std::sort(transitions.begin(), transitions.end());
        transitions.erase(std::unique(transitions.begin(), transitions.end()), transitions.end());
        Embedding base = rng.unit_vector(spec.dim);
        std::size_t next_t = 0;
        for (std::size_t f = 0; f < n; ++f) {
            if (next_t < transitions.size() && transitions[next_t] == f) {
                base = rng.unit_vector(spec.dim);
                ++next_t;
            }
            Embedding dir = rng.unit_vector(spec.dim);
            double mag = rng.uniform(0.0, jitter_max);
            Embedding emb(spec.dim);
            for (std::size_t k = 0; k < spec.dim; ++k) {
                emb[k] = base[k] + mag * dir[k];
            }
            vs.frames.push_back({cam.video_id, f, static_cast<double>(f) / spec.fps, std::move(emb)});
        }

        // Scene transitions must clear the calibrated threshold and the
        // jitter must stay well under it.
        double eps = oracle_calibrate(vs.frames);
        for (std::size_t f = 1; f < n; ++f) {
            double d = distance(vs.frames[f].embedding, vs.frames[f - 1].embedding);
            bool is_transition = std::binary_search(transitions.begin(), transitions.end(), f);
            if (is_transition ? d <= eps : d >= eps) {
                throw Error(ErrorCode::validation, "infeasible scenario: camera " + cam.video_id +
                                                       " transitions are not separable at frame " + std::to_string(f));
            }
        }
        if (jitter_max >= eps / 4.0) {
            throw Error(ErrorCode::validation, "infeasible scenario: jitter not below a quarter of the threshold for " +
                                                   cam.video_id);
        }

        // True identities per frame, then positions as a bounded random walk.
        std::vector<IdentitySet> truth_ids(n);
        for (const auto& [id, windows] : presence[ci]) {
            for (auto [a, b] : windows) {
                for (std::size_t f = a; f <= b && f < n; ++f) {
                    truth_ids[f].insert(id);
                }
            }
        }
        std::map<Identity, Position> walk;
        for (std::size_t f = 0; f < n; ++f) {
            IdentitySet emitted;
            std::vector<std::pair<Identity, Position>> dets;
            for (const auto& id : truth_ids[f]) {
                auto it = walk.find(id);
                if (it == walk.end()) {
                    it = walk.emplace(id, Position{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}).first;
                } else {
                    it->second.x = std::clamp(it->second.x + rng.uniform(-0.02, 0.02), 0.0, 1.0);
                    it->second.y = std::clamp(it->second.y + rng.uniform(-0.02, 0.02), 0.0, 1.0);
                }
                dets.emplace_back(id, it->second);
            }
            for (auto& [id, pos] : dets) {
                Identity token = id;
                if (spec.reid_noise_rate > 0.0 && rng.uniform() < spec.reid_noise_rate) {
                    std::vector<Identity> choices;
                    for (const auto& other : alphabet_list) {
                        if (!truth_ids[f].count(other) && !emitted.count(other)) {
                            choices.push_back(other);
                        }
                    }
                    if (!choices.empty()) {
                        token = choices[rng.index(choices.size())];
                    }
                }
                if (!emitted.insert(token).second) {
                    continue;
                }
                vs.detections.push_back({cam.video_id, f, static_cast<double>(f) / spec.fps, pos, token});
            }
        }
        std::sort(vs.detections.begin(), vs.detections.end(), [](const PersonDetection& a, const PersonDetection& b) {
            return std::tie(a.frame_index, a.identity) < std::tie(b.frame_index, b.identity);
        });

        CameraTruth ct;
        ct.video_id = cam.video_id;
        ct.location = cam.location;
        ct.date = cam.date;
        ct.frame_count = n;
        for (std::size_t f = 1; f < n; ++f) {
            if (std::binary_search(transitions.begin(), transitions.end(), f) || truth_ids[f] != truth_ids[f - 1]) {
                ct.boundaries.push_back(f);
            }
        }
        for (const auto& [id, windows] : presence[ci]) {
            ct.identities.insert(id);
            for (auto [a, b] : windows) {
                out.manifest.appearances[id].push_back(
                    {cam.video_id, a, b, static_cast<double>(a) / spec.fps, static_cast<double>(b + 1) / spec.fps});
            }
        }
        ct.frame_records = vs.frames.size();
        ct.detection_records = vs.detections.size();
        out.manifest.cameras.push_back(std::move(ct));
        out.streams.push_back(std::move(vs));
    }
    for (auto& [id, list] : out.manifest.appearances) {
        std::sort(list.begin(), list.end(), [](const IdentityInterval& a, const IdentityInterval& b) {
            return std::tie(a.video_id, a.first_frame) < std::tie(b.video_id, b.first_frame);
        });
    }
    out.queries = make_queries(spec, out.manifest);
    return out;
}

json queries_to_json(const std::vector<GeneratedQuery>& queries) {
    json arr = json::array();
    for (const auto& q : queries) {
        arr.push_back({{"id", q.id}, {"modality", q.modality}, {"query", q.query}, {"expected", q.expected}});
    }
    return {{"queries", std::move(arr)}};
}

std::vector<GeneratedQuery> queries_from_json(const json& doc) {
    std::vector<GeneratedQuery> out;
    try {
        for (const auto& q : doc.at("queries")) {
            out.push_back({q.at("id").get<std::string>(), q.at("modality").get<std::string>(), q.at("query"),
                           q.at("expected")});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::validation, std::string("query set: ") + e.what());
    }
    return out;
}

void write_scenario(const Scenario& scenario, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "streams", ec);
    if (ec) {
        throw Error(ErrorCode::io, "cannot create " + dir + ": " + ec.message());
    }
    auto write = [](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + p.string());
        }
    };
    for (const auto& s : scenario.streams) {
        write(fs::path(dir) / "streams" / (s.meta.video_id + ".jsonl"), write_stream_text(s));
    }
    write(fs::path(dir) / "manifest.json", scenario.manifest.to_json().dump(2) + "\n");
    write(fs::path(dir) / "queries.json", queries_to_json(scenario.queries).dump(2) + "\n");
}

json replay_expected(const json& query, const std::vector<VideoStream>& streams) {
    std::string task = query.at("task").get<std::string>();
    std::set<std::string> locs = query.at("locations").get<std::set<std::string>>();
    Date from = Date::parse(query.at("date_range").at("from").get<std::string>());
    Date to = Date::parse(query.at("date_range").at("to").get<std::string>());
    std::vector<const VideoStream*> scope;
    for (const auto& s : streams) {
        if (locs.count(s.meta.location) && from <= s.meta.date && s.meta.date <= to) {
            scope.push_back(&s);
        }
    }
    auto ids_of = [](const VideoStream& s) {
        IdentitySet out;
        for (const auto& d : s.detections) {
            out.insert(d.identity);
        }
        return out;
    };
    json expected;
    if (task == "presence") {
        Identity id = query.at("identities").at(0).get<std::string>();
        bool present = false;
        for (const auto* s : scope) {
            present = present || ids_of(*s).count(id) > 0;
        }
        expected["present"] = present;
    } else if (task == "locate") {
        Identity id = query.at("identities").at(0).get<std::string>();
        json videos = json::object();
        for (const auto* s : scope) {
            // maximal runs of consecutive frames with the identity
            std::optional<std::size_t> run_start, prev;
            auto close = [&] {
                if (run_start) {
                    videos[s->meta.video_id].push_back(
                        interval_json(*run_start / s->meta.fps, (*prev + 1) / s->meta.fps));
                }
            };
            for (const auto& d : s->detections) {
                if (d.identity != id) {
                    continue;
                }
                if (!prev || d.frame_index != *prev + 1) {
                    close();
                    run_start = d.frame_index;
                }
                prev = d.frame_index;
            }
            close();
        }
        expected["videos"] = std::move(videos);
    } else if (task == "count" || task == "summarize") {
        IdentitySet all;
        std::vector<std::string> vids;
        for (const auto* s : scope) {
            auto ids = ids_of(*s);
            all.insert(ids.begin(), ids.end());
            vids.push_back(s->meta.video_id);
        }
        if (task == "count") {
            expected["count"] = all.size();
        } else {
            std::sort(vids.begin(), vids.end());
            expected["videos"] = vids;
        }
        expected["identities"] = all;
    } else if (task == "common_identity") {
        std::vector<std::string> vids;
        for (const auto* s : scope) {
            vids.push_back(s->meta.video_id);
        }
        expected["identities"] = oracle_common_identities(streams, vids, std::nullopt);
    }
    return expected;
}

} // namespace vforest::testkit
