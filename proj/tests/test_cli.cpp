#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "vforest_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Run run(const std::string& args, const std::string& env = "") {
    fs::path out = workdir() / "stdout.txt";
    fs::path err = workdir() / "stderr.txt";
    std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + VFOREST_CLI + "' " + args + " >'" +
                      out.string() + "' 2>'" + err.string() + "'";
    int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const std::string corpus_flags = "--forest forest.json --kb kb.jsonl";

void ensure_corpus() {
    static bool ready = [] {
        Run s = run("synth --out corpus");
        REQUIRE(s.code == 0);
        Run b = run(corpus_flags + " build corpus/streams");
        REQUIRE(b.code == 0);
        return true;
    }();
    (void)ready;
}

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help").code == 0);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("query").code == 2);
    CHECK(run("--tau-rel 3 config").code == 2);
}

TEST_CASE("build over an empty corpus fails with a validation exit") {
    fs::create_directories(workdir() / "empty");
    Run r = run("--forest none.json build empty");
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK_FALSE(fs::exists(workdir() / "none.json"));
}

TEST_CASE("ingest summarizes and rejects with line numbers") {
    ensure_corpus();
    Run ok = run("--json ingest corpus/streams");
    REQUIRE(ok.code == 0);
    json videos = json::parse(ok.out)["videos"];
    REQUIRE(videos.size() == 6);
    for (const auto& v : videos) {
        CHECK(v["frames"].get<int>() > 0);
    }
    Run text = run("ingest corpus/streams/Lab-2024-03-01.jsonl");
    CHECK(text.out.find("Lab-2024-03-01: ") == 0);

    std::ofstream(workdir() / "bad.jsonl") << R"({"type":"meta","video_id":"v","location":"Lab","date":"2024-03-01","fps":1,"dim":2})"
                                           << "\n{\"type\":\"blob\"}\n";
    Run bad = run("ingest bad.jsonl");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("line 2") != std::string::npos);
}

TEST_CASE("query answers in JSON and traces stages") {
    ensure_corpus();
    Run r = run(corpus_flags + " --json --trace query --text 'Was P1 in Lab on 2024-03-01?'");
    REQUIRE(r.code == 0);
    json a = json::parse(r.out);
    CHECK(a["payload"]["present"] == true);
    CHECK(a["stages"].size() == 5);
    std::istringstream trace(r.err);
    std::string line;
    std::size_t stages = 0;
    while (std::getline(trace, line)) {
        CHECK(json::parse(line)["stage"] == ++stages);
    }
    CHECK(stages == 5);

    std::ofstream(workdir() / "q.json") << R"({"task":"count","description":"people","locations":["Gym"]})";
    Run f = run(corpus_flags + " --json query --file q.json");
    REQUIRE(f.code == 0);
    CHECK(json::parse(f.out)["task"] == "count");

    std::ofstream(workdir() / "bad_q.json") << R"({"task":"count"})";
    CHECK(run(corpus_flags + " query --file bad_q.json").code == 2);
    CHECK(run("--forest missing.json query --text 'who appeared in Lab'").code == 2);
}

TEST_CASE("search prints line-delimited trace records") {
    ensure_corpus();
    Run r = run(corpus_flags + " --trace --json search --text 'person P2' --identity P2 --video Lab-2024-03-01");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        json j = json::parse(line);
        CHECK(j.contains("node"));
        ++n;
    }
    CHECK(n > 1);
}

TEST_CASE("eval reports full accuracy on the default row") {
    ensure_corpus();
    Run r = run(corpus_flags + " --json eval --queries corpus/queries.json");
    REQUIRE(r.code == 0);
    json report = json::parse(r.out);
    REQUIRE(report["rows"].size() == 4);
    CHECK(report["rows"][0]["overall"]["accuracy"] == 1.0);
    CHECK(report["rows"][0]["overall"]["total"].get<int>() >= 40);

    Run text = run(corpus_flags + " eval --no-ablations --queries corpus/queries.json");
    REQUIRE(text.code == 0);
    CHECK(text.out.find("100.0") != std::string::npos);
}

TEST_CASE("knowledge base commands") {
    Run up = run("--kb kb_cmd.jsonl kb upsert --date 2024-03-01 --location Lab --description 'person A enters'");
    REQUIRE(up.code == 0);
    CHECK(up.out.find("inserted") != std::string::npos);
    run("--kb kb_cmd.jsonl kb upsert --date 2024-03-01 --location Lab --description 'person A enters'");
    Run show = run("--kb kb_cmd.jsonl --json kb show");
    REQUIRE(show.code == 0);
    json j = json::parse(show.out);
    REQUIRE(j["entries"].size() == 1);
    CHECK(j["entries"][0]["c"] == 2);
    CHECK(run("--kb kb_cmd.jsonl kb upsert --date nope --location Lab --description x").code == 2);
    CHECK(run("--kb kb_cmd.jsonl kb compact").code == 0);
}

TEST_CASE("configuration precedence from file, environment and flags") {
    std::ofstream(workdir() / "engine.toml") << "[search]\ntau_rel = 0.6\n[forest]\nfanout = 3\n";
    json from_env = json::parse(run("--json config", "ENGINE_CONFIG=engine.toml").out);
    CHECK(from_env["search.tau_rel"] == "0.6");
    CHECK(from_env["forest.fanout"] == "3");
    json with_flags =
        json::parse(run("--config engine.toml --tau-rel 0.9 --no-reid --max-depth 2 --set forest.fanout=5 --json config").out);
    CHECK(with_flags["search.tau_rel"] == "0.9");
    CHECK(with_flags["search.use_reid"] == "false");
    CHECK(with_flags["search.max_depth"] == "2");
    CHECK(with_flags["forest.fanout"] == "5");
    json defaults = json::parse(run("--json config").out);
    CHECK(defaults["search.tau_rel"] == "0.85");

    std::ofstream(workdir() / "broken.toml") << "[search]\n\ntau_rel = many\n";
    Run bad = run("--config broken.toml config");
    CHECK(bad.code == 2);
    CHECK(bad.err.find(":3:") != std::string::npos);
}

TEST_CASE("provider failures exit with the provider code") {
    ensure_corpus();
    Run r = run("--provider /nonexistent/adapter --forest p.json build corpus/streams");
    CHECK(r.code == 3);
    Run h = run("--provider http://127.0.0.1:1/rpc --forest p.json build corpus/streams");
    CHECK(h.code == 3);
}

TEST_CASE("synth is deterministic") {
    REQUIRE(run("--seed 21 synth --out s1").code == 0);
    REQUIRE(run("--seed 21 synth --out s2").code == 0);
    CHECK(slurp(workdir() / "s1" / "queries.json") == slurp(workdir() / "s2" / "queries.json"));
    CHECK(slurp(workdir() / "s1" / "manifest.json") == slurp(workdir() / "s2" / "manifest.json"));
}

TEST_CASE("every command keeps standard output machine-readable under --json") {
    ensure_corpus();
    const std::vector<std::string> commands{
        "synth --out j1",
        "build corpus/streams",
        "ingest corpus/streams",
        "query --text 'who appeared in Lab'",
        "search --text 'person P1' --identity P1",
        "kb show",
        "kb upsert --date 2024-03-01 --location Lab --description 'camera idle'",
        "kb compact",
        "eval --no-ablations --queries corpus/queries.json",
        "config",
    };
    for (const auto& c : commands) {
        INFO(c);
        Run r = run("--forest forest_json.json --kb kb_json.jsonl --json " + c);
        REQUIRE(r.code == 0);
        CHECK(json::accept(r.out));
    }
}
