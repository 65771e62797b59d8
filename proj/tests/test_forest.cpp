#include "support.hpp"

#include "vforest/engine.hpp"
#include "vforest/error.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace vforest;
using json = nlohmann::json;

namespace {

Forest scenario_forest(std::uint64_t seed, testkit::Scenario* out = nullptr) {
    auto sc = testkit::generate(testkit::default_spec(seed));
    MockProvider provider(sc.streams[0].meta.dim);
    Forest f = build_forest(sc.streams, EngineConfig{}, provider);
    if (out) {
        *out = std::move(sc);
    }
    return f;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("vforest_test_" + name)).string();
}

ErrorCode load_error(const std::string& text) {
    try {
        deserialize_forest(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::internal;
}

} // namespace

TEST_CASE("single segment gives a root that is also a leaf") {
    std::mt19937_64 rng(41);
    VideoTree t = vftest::random_tree(rng, 1, 4);
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.node(t.root).is_leaf());
    CHECK(t.node(t.root).segment.has_value());
    CHECK(t.height() == 0);
    CHECK(validate_tree(t).empty());
}

TEST_CASE("five segments at fanout four give a depth-two tree") {
    std::mt19937_64 rng(42);
    VideoStream s;
    VideoTree t = vftest::random_tree(rng, 5, 4, 3, &s);
    CHECK(t.height() == 2);
    CHECK(t.leaf_count == 5);
    const TreeNode& root = t.node(t.root);
    REQUIRE(root.children.size() == 2);
    CHECK(t.node(root.children[0]).children.size() == 4);
    CHECK(root.frame_start == 0);
    CHECK(root.frame_end == s.frames.size());
    CHECK(root.t_start == 0.0);
    CHECK(root.t_end == doctest::Approx(static_cast<double>(s.frames.size()) / s.meta.fps));
    CHECK(validate_tree(t).empty());
}

TEST_CASE("injected child gap is one coverage violation on the parent") {
    std::mt19937_64 rng(43);
    for (int attempt = 0; attempt < 100; ++attempt) {
        VideoTree t = vftest::random_tree(rng, 5, 4);
        NodeId parent = t.node(t.root).children[0];
        TreeNode& second = t.nodes[t.node(parent).children[1]];
        if (second.frame_end - second.frame_start < 2) {
            continue;
        }
        second.frame_start += 1;
        second.t_start += 1.0 / t.meta.fps;
        second.segment->start_index += 1;
        second.segment->keyframe_index = (second.segment->start_index + second.segment->end_index) / 2;
        auto v = validate_tree(t);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == ViolationKind::coverage);
        CHECK(v[0].node == parent);
        return;
    }
    FAIL("no suitable tree generated");
}

TEST_CASE("identity dropped from an inner node is a reid-union violation") {
    std::mt19937_64 rng(44);
    for (int attempt = 0; attempt < 50; ++attempt) {
        VideoTree t = vftest::random_tree(rng, 16, 4, 4);
        auto inner = std::find_if(t.nodes.begin(), t.nodes.end(),
                                  [&](const TreeNode& n) { return !n.is_leaf() && n.id != t.root && !n.reid_summary.empty(); });
        if (inner == t.nodes.end()) {
            continue;
        }
        NodeId id = inner->id;
        inner->reid_summary.erase(inner->reid_summary.begin());
        auto v = validate_tree(t);
        CHECK(std::any_of(v.begin(), v.end(),
                          [&](const Violation& x) { return x.kind == ViolationKind::reid_union && x.node == id; }));
        return;
    }
    FAIL("no inner node with identities generated");
}

TEST_CASE("built trees validate across random streams and fanouts") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 150; ++trial) {
        auto s = vftest::random_stream(rng, "r" + std::to_string(trial), vftest::pick(rng, 1, 200),
                                       vftest::pick(rng, 1, 5), 5);
        EngineConfig cfg;
        cfg.fanout = vftest::pick(rng, 2, 6);
        MockProvider provider(s.meta.dim);
        VideoTree t = build_video_tree(s, cfg, provider);
        auto v = validate_tree(t);
        INFO("trial " << trial << ": " << (v.empty() ? std::string() : v[0].message));
        REQUIRE(v.empty());
        CHECK(t.leaves().size() == t.leaf_count);
        CHECK(t.node(t.root).frame_end == s.frames.size());
    }
}

TEST_CASE("forest round-trips through its file format") {
    Forest f = scenario_forest(2);
    Forest back = deserialize_forest(serialize_forest(f));
    CHECK(back == f);

    std::string path = temp_path("forest.json");
    save_forest(f, path);
    Forest loaded = load_forest(path);
    CHECK(loaded == f);
    for (std::size_t i = 0; i < f.trees.size(); ++i) {
        CHECK(loaded.trees[i].nodes.size() == f.trees[i].nodes.size());
    }
    std::filesystem::remove(path);
}

TEST_CASE("forest loader rejects damaged files") {
    Forest f = scenario_forest(2);
    json doc = json::parse(serialize_forest(f));

    json bumped = doc;
    bumped["version"] = forest_format_version + 1;
    CHECK(load_error(bumped.dump()) == ErrorCode::version_mismatch);

    json tampered = doc;
    tampered["trees"][0]["meta"]["location"] = "Elsewhere";
    CHECK(load_error(tampered.dump()) == ErrorCode::checksum);

    std::string text = doc.dump();
    CHECK(load_error(text.substr(0, text.size() / 2)) == ErrorCode::format);
    CHECK(load_error("{}") == ErrorCode::format);

    try {
        load_forest("/nonexistent/forest.json");
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::io);
    }
}

TEST_CASE("identity index reflects the planted traversals") {
    testkit::Scenario sc;
    Forest f = scenario_forest(6, &sc);
    const auto& idx = f.identity_index;

    std::set<std::string> p1_videos;
    for (const auto& a : idx.appearances("P1")) {
        p1_videos.insert(a.video_id);
    }
    CHECK(p1_videos == std::set<std::string>{"Lab-2024-03-01", "Library-2024-03-01", "Gym-2024-03-01"});
    CHECK(idx.appearances("nobody").empty());

    std::vector<std::string> day1{"Lab-2024-03-01", "Library-2024-03-01", "Gym-2024-03-01"};
    CHECK(idx.identities_common_to(day1) == testkit::oracle_common_identities(sc.streams, day1, std::nullopt));
    std::vector<std::string> one{"Lab-2024-03-02"};
    CHECK(idx.identities_common_to(one) == idx.identities_of("Lab-2024-03-02"));
    CHECK_THROWS_AS(idx.identities_common_to(std::vector<std::string>{"missing"}), Error);
}

TEST_CASE("identity appearing in one video appears under exactly that video") {
    testkit::Scenario sc;
    Forest f = scenario_forest(7, &sc);
    for (const auto& [id, list] : f.identity_index.entries()) {
        if (id.rfind("B", 0) != 0) {
            continue;
        }
        std::set<std::string> vids;
        for (const auto& a : list) {
            vids.insert(a.video_id);
        }
        CHECK(vids.size() == 1);
        CHECK(vids == std::set<std::string>{sc.manifest.appearances.at(id).front().video_id});
    }
}

TEST_CASE("empty detections give an empty index") {
    std::mt19937_64 rng(46);
    auto s = vftest::random_stream(rng, "e", 30, 3, 0);
    MockProvider provider(3);
    Forest f = build_forest(std::span(&s, 1), EngineConfig{}, provider);
    CHECK(f.identity_index.empty());
}

TEST_CASE("filtered appearances agree with a brute-force detection scan") {
    testkit::Scenario sc;
    Forest f = scenario_forest(8, &sc);
    std::mt19937_64 rng(47);
    std::vector<std::string> locs{"Lab", "Library", "Gym"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string id = f.identity_index.entries().begin()->first;
        auto it = f.identity_index.entries().begin();
        std::advance(it, vftest::pick(rng, 0, f.identity_index.entries().size() - 1));
        id = it->first;
        const auto& frames = sc.streams[0].frames;
        double a = frames[vftest::pick(rng, 0, frames.size() - 1)].timestamp;
        double b = frames[vftest::pick(rng, 0, frames.size() - 1)].timestamp;
        if (a > b) {
            std::swap(a, b);
        }
        std::optional<TimeWindow> window;
        std::optional<std::pair<double, double>> owindow;
        if (vftest::coin(rng, 0.7)) {
            window = TimeWindow{a, b};
            owindow = std::make_pair(a, b);
        }
        std::optional<std::set<std::string>> where;
        if (vftest::coin(rng, 0.5)) {
            where = std::set<std::string>{locs[vftest::pick(rng, 0, 2)]};
        }
        std::set<std::string> got;
        for (const auto& ap : f.identity_index.appearances(id, window, where)) {
            got.insert(ap.video_id);
        }
        std::set<std::string> want;
        for (const auto& d : testkit::oracle_detections(sc.streams, id, owindow, where)) {
            want.insert(d.video_id);
        }
        CHECK(got == want);
    }
}
