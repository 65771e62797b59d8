#include "support.hpp"

#include "vforest/agents.hpp"
#include "vforest/engine.hpp"
#include "vforest/error.hpp"

#include <doctest.h>

using namespace vforest;
using json = nlohmann::json;

namespace {

struct World {
    testkit::Scenario scenario;
    Forest forest;
    std::unique_ptr<MockProvider> provider;

    explicit World(std::uint64_t seed = 9) : scenario(testkit::generate(testkit::default_spec(seed))) {
        provider = std::make_unique<MockProvider>(scenario.streams[0].meta.dim);
        forest = build_forest(scenario.streams, EngineConfig{}, *provider);
    }

    std::vector<VideoMeta> metas() const {
        std::vector<VideoMeta> out;
        for (const auto& t : forest.trees) {
            out.push_back(t.meta);
        }
        return out;
    }
};

StructuredQuery presence(const std::string& id, const std::string& loc, const std::string& date) {
    return StructuredQuery::from_json(
        {{"task", "presence"}, {"identities", {id}}, {"locations", {loc}}, {"date_range", {{"from", date}, {"to", date}}}});
}

std::vector<std::string> ids_of(const std::vector<const VideoTree*>& trees) {
    std::vector<std::string> out;
    for (const auto* t : trees) {
        out.push_back(t->meta.video_id);
    }
    return out;
}

} // namespace

TEST_CASE("structured queries parse strictly and round-trip") {
    json doc = {{"task", "locate"},
                {"identities", {"P2"}},
                {"locations", {"Lab", "Gym"}},
                {"date_range", {{"from", "2024-03-01"}, {"to", "2024-03-02"}}},
                {"modality", "cross_spatiotemporal"}};
    auto q = StructuredQuery::from_json(doc);
    CHECK(q.task == Task::locate);
    CHECK(*q.locations == std::set<std::string>{"Gym", "Lab"});
    CHECK(StructuredQuery::from_json(q.to_json()) == q);
    CHECK(q.query_text() == "person P2");

    auto parse_code = [](const json& j) {
        try {
            StructuredQuery::from_json(j);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::internal;
    };
    CHECK(parse_code({{"task", "dance"}, {"description", "x"}}) == ErrorCode::parse);
    CHECK(parse_code({{"task", "presence"}, {"description", "x"}}) == ErrorCode::parse);
    CHECK(parse_code({{"task", "count"}}) == ErrorCode::parse);
    CHECK(parse_code({{"task", "count"}, {"description", "x"}, {"colour", "red"}}) == ErrorCode::parse);
    CHECK(parse_code({{"task", "count"}, {"description", "x"}, {"date_range", {{"from", "2024-03-02"}, {"to", "2024-03-01"}}}}) ==
          ErrorCode::parse);
    CHECK_THROWS_AS(StructuredQuery::parse("{oops"), Error);
}

TEST_CASE("video filter selects by metadata") {
    World w;
    auto all = filter_videos(StructuredQuery::from_json({{"task", "summarize"}, {"description", "anything"}}), w.forest);
    CHECK(all.size() == w.forest.trees.size());

    auto q = presence("P1", "Lab", "2024-03-01");
    CHECK(ids_of(filter_videos(q, w.forest)) == std::vector<std::string>{"Lab-2024-03-01"});
    CHECK(ids_of(filter_videos(q, w.forest)) == testkit::oracle_filter(w.metas(), q.date_range, q.locations));
    CHECK(filter_videos(q, w.forest, false).size() == w.forest.trees.size());

    CHECK_THROWS_AS(filter_videos(q, Forest{}), Error);
}

TEST_CASE("knowledge-base context and short-circuit") {
    KnowledgeBase kb;
    auto q = presence("P1", "Lab", "2024-03-01");
    auto empty = retrieve_context(q, kb);
    CHECK(empty.entries.empty());
    CHECK_FALSE(empty.short_circuit);

    KBEntry fact{Date::parse("2024-03-01"), "Lab", presence_fact("P1"), 1};
    kb.upsert(fact);
    CHECK_FALSE(retrieve_context(q, kb).short_circuit);
    kb.upsert(fact);
    kb.upsert(fact);
    CHECK(retrieve_context(q, kb).short_circuit);
    CHECK_FALSE(retrieve_context(presence("P1", "Gym", "2024-03-01"), kb).short_circuit);
    CHECK_FALSE(retrieve_context(presence("P2", "Lab", "2024-03-01"), kb).short_circuit);
}

TEST_CASE("navigation prunes by identity and covers roots for aggregate tasks") {
    World w;
    auto q = presence("P2", "Lab", "2024-03-01");
    auto selected = filter_videos(q, w.forest);
    auto nav = navigate(q, selected, *w.provider, PipelineOptions{});
    REQUIRE_FALSE(nav.trace.empty());
    for (const auto& e : nav.trace) {
        CHECK(selected[0]->node(e.node).identities().count("P2") == 1);
    }
    CHECK(nav.hits.size() == 1);

    auto count = StructuredQuery::from_json({{"task", "count"}, {"description", "people"}});
    auto every = filter_videos(count, w.forest);
    auto cnav = navigate(count, every, *w.provider, PipelineOptions{});
    REQUIRE(cnav.hits.size() == every.size());
    for (std::size_t i = 0; i < every.size(); ++i) {
        CHECK(cnav.hits[i].node == every[i]->root);
    }
    CHECK(navigate(count, {}, *w.provider, PipelineOptions{}).hits.empty());
}

TEST_CASE("common identity over the planted traversal") {
    World w;
    auto q = StructuredQuery::from_json({{"task", "common_identity"},
                                         {"locations", {"Lab", "Library", "Gym"}},
                                         {"date_range", {{"from", "2024-03-01"}, {"to", "2024-03-01"}}},
                                         {"description", "who was everywhere"}});
    KnowledgeBase kb;
    Answer a = answer_query(q, w.forest, kb, *w.provider);
    std::vector<std::string> day1{"Gym-2024-03-01", "Lab-2024-03-01", "Library-2024-03-01"};
    IdentitySet expected = testkit::oracle_common_identities(w.scenario.streams, day1, std::nullopt);
    CHECK(a.payload["identities"].get<IdentitySet>() == expected);
    CHECK(expected == IdentitySet{"P1", "P5"});
}

TEST_CASE("no hits and no knowledge give insufficient evidence") {
    World w;
    auto q = presence("NOBODY", "Lab", "2024-03-01");
    auto selected = filter_videos(q, w.forest);
    Answer a = integrate(q, selected, {}, KBContext{}, *w.provider);
    CHECK(a.insufficient_evidence);
    CHECK(a.text == insufficient_evidence_text);
    CHECK(a.hits.empty());
    CHECK(a.kb_evidence.empty());
    CHECK(a.payload["present"] == false);
    CHECK(a.to_json()["evidence"].empty());
}

TEST_CASE("confident knowledge short-circuits the tree stages") {
    World w;
    KnowledgeBase kb;
    KBEntry fact{Date::parse("2024-03-01"), "Lab", presence_fact("P1"), 1};
    for (int i = 0; i < 3; ++i) {
        kb.upsert(fact);
    }
    Answer a = answer_query(presence("P1", "Lab", "2024-03-01"), w.forest, kb, *w.provider);
    CHECK(a.short_circuit);
    CHECK(a.hits.empty());
    REQUIRE(a.kb_evidence.size() == 1);
    CHECK(a.kb_evidence[0].description == presence_fact("P1"));
    CHECK(a.payload["present"] == true);
    REQUIRE(a.stages.size() == 5);
    CHECK(a.stages[2].status == "skipped");
    CHECK(a.stages[3].status == "skipped");
    CHECK(a.stages[4].status == "done");
    CHECK(kb.snapshot()[0].confidence == 4);
    CHECK(a.provider_calls == 0);
}

TEST_CASE("asking twice never costs more provider calls") {
    World w;
    KnowledgeBase kb;
    std::string text = "was P3 in Library on 2024-03-01";
    std::vector<std::size_t> calls;
    for (int i = 0; i < 5; ++i) {
        calls.push_back(answer_query(text, w.forest, kb, *w.provider).provider_calls);
    }
    for (std::size_t i = 1; i < calls.size(); ++i) {
        CHECK(calls[i] <= calls[i - 1]);
    }
    CHECK(calls.back() < calls.front());
}

TEST_CASE("malformed structured query leaves the knowledge base alone") {
    World w;
    KnowledgeBase kb;
    kb.upsert({Date::parse("2024-03-01"), "Lab", "person P1 present", 1});
    auto before = kb.snapshot();
    try {
        answer_query(std::string_view(R"({"task":"presence","identities":"P1"})"), w.forest, kb, *w.provider);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
    }
    CHECK(kb.snapshot() == before);
}

TEST_CASE("stage failures name the stage") {
    KnowledgeBase kb;
    MockProvider p(4);
    try {
        answer_query(presence("P1", "Lab", "2024-03-01"), Forest{}, kb, p);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::validation);
        CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
    }
}

TEST_CASE("reflection hook runs before the update") {
    World w;
    KnowledgeBase kb;
    bool ran = false;
    PipelineHooks hooks;
    hooks.reflection = [&](const StructuredQuery&, Answer& a) {
        ran = true;
        CHECK(a.stages.size() == 4);
        a.derived_facts.clear();
    };
    Answer a = answer_query(presence("P1", "Lab", "2024-03-01"), w.forest, kb, *w.provider, {}, hooks);
    CHECK(ran);
    CHECK(kb.size() == 0);
    CHECK(a.stages[4].status == "no-op");
}

TEST_CASE("generated suite is answered exactly under default options") {
    World w(12);
    KnowledgeBase kb;
    std::size_t n = 0;
    for (const auto& gq : w.scenario.queries) {
        auto q = StructuredQuery::from_json(gq.query);
        Answer a = answer_query(q, w.forest, kb, *w.provider);
        INFO(gq.id << " " << gq.query.dump() << " -> " << a.payload.dump());
        CHECK(answer_matches(q, a, gq.expected));
        ++n;
    }
    CHECK(n >= 40);
}

TEST_CASE("answer keys agree with a replay over the raw streams") {
    World w(13);
    for (const auto& gq : w.scenario.queries) {
        INFO(gq.id);
        CHECK(testkit::replay_expected(gq.query, w.scenario.streams) == gq.expected);
    }
}

TEST_CASE("positive presence answers survive disabling the video filter") {
    World w(14);
    PipelineOptions no_filter;
    no_filter.use_filter = false;
    std::size_t checked = 0;
    for (const auto& gq : w.scenario.queries) {
        auto q = StructuredQuery::from_json(gq.query);
        if (q.task != Task::presence || !gq.expected["present"].get<bool>()) {
            continue;
        }
        KnowledgeBase kb1;
        KnowledgeBase kb2;
        Answer a = answer_query(q, w.forest, kb1, *w.provider);
        Answer b = answer_query(q, w.forest, kb2, *w.provider, no_filter);
        CHECK(a.payload["present"] == b.payload["present"]);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("fresh hits overrule a stored presence fact they contradict") {
    World w;
    const IdentitySet& here = w.forest.identity_index.identities_of("Lab-2024-03-01");
    Identity absent;
    for (const auto& [id, _] : w.forest.identity_index.entries()) {
        if (here.count(id) == 0) {
            absent = id;
            break;
        }
    }
    REQUIRE_FALSE(absent.empty());
    KBEntry stale{Date::parse("2024-03-01"), "Lab", presence_fact(absent), 1};

    KnowledgeBase weak;
    weak.upsert(stale);
    weak.upsert(stale);
    Answer a = answer_query(presence(absent, "Lab", "2024-03-01"), w.forest, weak, *w.provider);
    CHECK(a.payload["present"] == false);
    REQUIRE(weak.size() == 1);
    CHECK(weak.snapshot()[0].description == "person " + absent + " not present");
    CHECK(weak.snapshot()[0].confidence == 1);

    KnowledgeBase strong(KBConfig{10, 0.5, 8});
    for (int i = 0; i < 5; ++i) {
        strong.upsert(stale);
    }
    Answer b = answer_query(presence(absent, "Lab", "2024-03-01"), w.forest, strong, *w.provider);
    CHECK(b.payload["present"] == false);
    REQUIRE(strong.size() == 1);
    CHECK(strong.snapshot()[0].description == presence_fact(absent));
    CHECK(strong.snapshot()[0].confidence == 4);
}
