#include "support.hpp"

#include "vforest/error.hpp"
#include "vforest/knowledge_base.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace vforest;

namespace {

const Date d1 = Date::parse("2024-03-01");
const Date d2 = Date::parse("2024-03-02");

KBEntry fact(const std::string& s, Date d = d1, const std::string& l = "Lab") {
    return {d, l, s, 1};
}

// Puts `s` in the KB with confidence c by repeated reinforcement.
void seed_confidence(KnowledgeBase& kb, const KBEntry& e, int c) {
    for (int i = 0; i < c; ++i) {
        kb.upsert(e);
    }
}

std::vector<testkit::OracleFact> as_oracle(const std::vector<KBEntry>& entries) {
    std::vector<testkit::OracleFact> out;
    for (const auto& e : entries) {
        out.push_back({e.date, e.location, e.description, e.confidence});
    }
    return out;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("vforest_test_" + name)).string();
}

} // namespace

TEST_CASE("similarity is token Jaccard") {
    CHECK(default_similarity("person A enters room", "person A exits room") == doctest::Approx(0.6));
    CHECK(default_similarity("same words", "same words") == 1.0);
    CHECK(default_similarity("alpha beta", "gamma delta") == 0.0);
    CHECK(default_similarity("Person, A!", "person a") == 1.0);
    CHECK(default_similarity("", "") == 1.0);
    CHECK(testkit::oracle_jaccard("person A enters room", "person A exits room") == doctest::Approx(0.6));
}

TEST_CASE("novel entry is inserted with confidence one") {
    KnowledgeBase kb;
    CHECK(kb.upsert(fact("person A enters room")) == UpsertOutcome::inserted);
    REQUIRE(kb.size() == 1);
    CHECK(kb.snapshot()[0].confidence == 1);
}

TEST_CASE("exact duplicate increments confidence") {
    KnowledgeBase kb;
    seed_confidence(kb, fact("person A enters room"), 4);
    REQUIRE(kb.snapshot()[0].confidence == 4);
    CHECK(kb.upsert(fact("person A enters room")) == UpsertOutcome::reinforced);
    CHECK(kb.snapshot()[0].confidence == 5);
    CHECK(kb.size() == 1);
}

TEST_CASE("conflict with a confident entry decays it") {
    KnowledgeBase kb;
    seed_confidence(kb, fact("person A enters room"), 3);
    CHECK(kb.upsert(fact("person A exits room")) == UpsertOutcome::decayed);
    auto snap = kb.snapshot();
    REQUIRE(snap.size() == 1);
    CHECK(snap[0].description == "person A enters room");
    CHECK(snap[0].confidence == 2);
}

TEST_CASE("conflict with a weak entry replaces it") {
    KnowledgeBase kb;
    seed_confidence(kb, fact("person A enters room"), 2);
    CHECK(kb.upsert(fact("person A exits room")) == UpsertOutcome::replaced);
    auto snap = kb.snapshot();
    REQUIRE(snap.size() == 1);
    CHECK(snap[0].description == "person A exits room");
    CHECK(snap[0].confidence == 1);
}

TEST_CASE("the reference update reproduces the four branch examples") {
    auto sim = testkit::oracle_jaccard;
    std::vector<testkit::OracleFact> kb;
    testkit::OracleFact enters{d1, "Lab", "person A enters room", 1};
    testkit::OracleFact exits{d1, "Lab", "person A exits room", 1};
    testkit::oracle_kb_upsert(kb, enters, 10, 0.5, sim);
    CHECK(kb == std::vector<testkit::OracleFact>{{d1, "Lab", "person A enters room", 1}});
    kb[0].confidence = 4;
    testkit::oracle_kb_upsert(kb, enters, 10, 0.5, sim);
    CHECK(kb[0].confidence == 5);
    kb[0].confidence = 3;
    testkit::oracle_kb_upsert(kb, exits, 10, 0.5, sim);
    CHECK(kb == std::vector<testkit::OracleFact>{{d1, "Lab", "person A enters room", 2}});
    testkit::oracle_kb_upsert(kb, exits, 10, 0.5, sim);
    CHECK(kb == std::vector<testkit::OracleFact>{{d1, "Lab", "person A exits room", 1}});
}

TEST_CASE("confidence saturates at c_max") {
    KnowledgeBase kb(KBConfig{4, 0.5, 3});
    seed_confidence(kb, fact("x y"), 9);
    CHECK(kb.snapshot()[0].confidence == 4);
}

TEST_CASE("conflicts need the same date and location") {
    KnowledgeBase kb;
    seed_confidence(kb, fact("person A enters room"), 3);
    CHECK(kb.upsert(fact("person A exits room", d2)) == UpsertOutcome::inserted);
    CHECK(kb.upsert(fact("person A exits room", d1, "Gym")) == UpsertOutcome::inserted);
    CHECK(kb.size() == 3);
}

TEST_CASE("every upsert sequence over a small alphabet matches the reference") {
    const std::vector<KBEntry> alphabet{fact("person A enters room"), fact("person A exits room"),
                                        fact("person B enters room"), fact("camera idle"),
                                        fact("person A enters room", d2)};
    KBConfig cfg{5, 0.5, 3};
    std::size_t sequences = 0;
    // all sequences up to length 6 over 5 symbols
    for (std::size_t len = 0; len <= 6; ++len) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < len; ++i) {
            total *= alphabet.size();
        }
        for (std::size_t code = 0; code < total; ++code) {
            KnowledgeBase kb(cfg);
            std::vector<testkit::OracleFact> oracle;
            std::size_t c = code;
            for (std::size_t i = 0; i < len; ++i) {
                const KBEntry& e = alphabet[c % alphabet.size()];
                c /= alphabet.size();
                kb.upsert(e);
                testkit::oracle_kb_upsert(oracle, {e.date, e.location, e.description, 1}, cfg.c_max, cfg.tau_sim,
                                          testkit::oracle_jaccard);
                REQUIRE(as_oracle(kb.snapshot()) == oracle);
            }
            ++sequences;
        }
    }
    CHECK(sequences == 19531);
}

TEST_CASE("random fifty-step upsert sequences match the reference") {
    std::mt19937_64 rng(51);
    std::vector<std::string> words{"person", "A", "B", "enters", "exits", "room", "hall"};
    for (int trial = 0; trial < 300; ++trial) {
        KBConfig cfg{static_cast<int>(vftest::pick(rng, 3, 8)), vftest::uniform(rng, 0.05, 0.9), 3};
        KnowledgeBase kb(cfg);
        std::vector<testkit::OracleFact> oracle;
        for (int step = 0; step < 50; ++step) {
            std::string s;
            for (std::size_t w = 0, n = vftest::pick(rng, 1, 4); w < n; ++w) {
                s += (s.empty() ? "" : " ") + words[vftest::pick(rng, 0, words.size() - 1)];
            }
            KBEntry e{vftest::coin(rng, 0.5) ? d1 : d2, vftest::coin(rng, 0.7) ? "Lab" : "Gym", s, 1};
            kb.upsert(e);
            testkit::oracle_kb_upsert(oracle, {e.date, e.location, e.description, 1}, cfg.c_max, cfg.tau_sim,
                                      testkit::oracle_jaccard);
            auto snap = kb.snapshot();
            REQUIRE(as_oracle(snap) == oracle);
            for (const auto& x : snap) {
                REQUIRE(x.confidence >= 1);
                REQUIRE(x.confidence <= cfg.c_max);
            }
        }
    }
}

TEST_CASE("retrieval ranks the priority tier first") {
    KnowledgeBase kb(KBConfig{10, 0.5, 3});
    kb.upsert(fact("person A present"));
    seed_confidence(kb, fact("person B present"), 5);
    auto r = kb.retrieve({});
    REQUIRE(r.size() == 2);
    CHECK(r[0].entry.description == "person B present");
    CHECK(r[0].priority);
    CHECK_FALSE(r[1].priority);
    CHECK(KnowledgeBase().retrieve({}).empty());
}

TEST_CASE("random retrieval matches the reference filter and sort") {
    std::mt19937_64 rng(52);
    std::vector<std::string> descs{"person A present", "person B present", "person A enters hall",
                                   "two persons present", "hall empty"};
    std::vector<std::string> locs{"Lab", "Gym", "Library"};
    std::vector<Date> dates{d1, d2, Date::parse("2024-03-03")};
    for (int trial = 0; trial < 300; ++trial) {
        KnowledgeBase kb(KBConfig{6, 0.8, static_cast<int>(vftest::pick(rng, 1, 4))});
        std::vector<testkit::OracleFact> oracle;
        for (int i = 0, n = static_cast<int>(vftest::pick(rng, 0, 30)); i < n; ++i) {
            KBEntry e{dates[vftest::pick(rng, 0, 2)], locs[vftest::pick(rng, 0, 2)],
                      descs[vftest::pick(rng, 0, descs.size() - 1)], 1};
            kb.upsert(e);
            testkit::oracle_kb_upsert(oracle, {e.date, e.location, e.description, 1}, 6, 0.8,
                                      testkit::oracle_jaccard);
        }
        KBConstraints c;
        if (vftest::coin(rng, 0.5)) {
            std::size_t a = vftest::pick(rng, 0, 2);
            std::size_t b = vftest::pick(rng, a, 2);
            c.date_range = DateRange{dates[a], dates[b]};
        }
        if (vftest::coin(rng, 0.5)) {
            c.locations = std::set<std::string>{locs[vftest::pick(rng, 0, 2)], locs[vftest::pick(rng, 0, 2)]};
        }
        if (vftest::coin(rng, 0.6)) {
            c.description_query = descs[vftest::pick(rng, 0, descs.size() - 1)];
        }
        std::vector<testkit::OracleFact> got;
        for (const auto& r : kb.retrieve(c)) {
            got.push_back({r.entry.date, r.entry.location, r.entry.description, r.entry.confidence});
        }
        REQUIRE(got == testkit::oracle_retrieve(oracle, c.date_range, c.locations, c.description_query,
                                                kb.config().tau_conf, testkit::oracle_jaccard));
    }
}

TEST_CASE("knowledge base round-trips through its file format") {
    std::mt19937_64 rng(53);
    KnowledgeBase kb(KBConfig{7, 0.6, 2});
    for (int i = 0; i < 1000; ++i) {
        kb.upsert(fact("fact " + std::to_string(i) + " about room", d1, "L" + std::to_string(i % 7)));
    }
    for (int i = 0; i < 200; ++i) {
        kb.upsert(fact("fact " + std::to_string(vftest::pick(rng, 0, 999)) + " about room", d1,
                       "L" + std::to_string(vftest::pick(rng, 0, 6))));
    }
    std::string path = temp_path("kb.jsonl");
    kb.save(path);
    KnowledgeBase back = KnowledgeBase::load(path);
    CHECK(back.size() == kb.size());
    CHECK(back.snapshot() == kb.snapshot());
    CHECK(back.config() == kb.config());
    CHECK(KnowledgeBase::load(path, KBConfig{}).config() == KBConfig{});
    std::filesystem::remove(path);
}

TEST_CASE("empty file loads as an empty knowledge base") {
    CHECK(KnowledgeBase::parse("").size() == 0);
}

TEST_CASE("later lines for the same fact win") {
    std::string text = R"({"type":"kb","version":1,"c_max":10,"tau_sim":0.5,"tau_conf":3})"
                       "\n"
                       R"({"d":"2024-03-01","l":"Lab","s":"x","c":2})"
                       "\n"
                       R"({"d":"2024-03-01","l":"Lab","s":"x","c":6})"
                       "\n";
    auto kb = KnowledgeBase::parse(text);
    REQUIRE(kb.size() == 1);
    CHECK(kb.snapshot()[0].confidence == 6);
}

TEST_CASE("malformed knowledge-base files are rejected") {
    CHECK_THROWS_AS(KnowledgeBase::parse("{\"d\":\"2024-13-01\",\"l\":\"L\",\"s\":\"x\",\"c\":1}\n"), Error);
    CHECK_THROWS_AS(KnowledgeBase::parse("{\"d\":\"2024-03-01\",\"l\":\"L\",\"s\":\"x\",\"c\":0}\n"), Error);
    CHECK_THROWS_AS(KnowledgeBase::parse("not json\n"), Error);
    CHECK_THROWS_AS(KnowledgeBase().upsert(fact("")), Error);
}

TEST_CASE("write observer sees every upsert") {
    KnowledgeBase kb;
    std::vector<UpsertOutcome> seen;
    kb.set_write_observer([&](const KBEntry&, UpsertOutcome o) { seen.push_back(o); });
    kb.upsert(fact("a b"));
    kb.upsert(fact("a b"));
    CHECK(seen == std::vector<UpsertOutcome>{UpsertOutcome::inserted, UpsertOutcome::reinforced});
}
