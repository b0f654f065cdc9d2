#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("forceagg_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct Cleanup {
    fs::path dir = workdir();
    ~Cleanup() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
} cleanup;

std::string path(const std::string& name) {
    return (workdir() / name).string();
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const std::string& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

// Exit status of the tool; stdout and stderr land in out.txt / err.txt.
int run(const std::string& args) {
    std::string cmd = std::string(FORCEAGG_CLI) + " " + args + " >" + path("out.txt") + " 2>" + path("err.txt");
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSpec = R"({"seed": 3, "duration": 48, "report_period": 8,
 "noise": {"position_sigma": 2, "orientation_sigma": 0.05},
 "units": [
  {"unit_type": "mech_platoon", "start": {"x": 0, "y": 0}, "waypoints": [{"x": 0, "y": 1000}], "speed": 1, "spacing": 200},
  {"unit_type": "mbt_platoon", "start": {"x": 5000, "y": 0}, "waypoints": [{"x": 5000, "y": 1000}], "speed": 1, "spacing": 200}],
 "observers": [
  {"id": "obs-a", "position": {"x": -600, "y": 0}, "max_range": 2000},
  {"id": "obs-b", "position": {"x": 5600, "y": 0}, "max_range": 2000}]})";

std::size_t lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct Outputs {
    std::string log, tracks, picture;
};

Outputs pipeline(const std::string& tag, const std::string& extra = "") {
    spit(path("spec.json"), kSpec);
    Outputs o;
    REQUIRE(run(extra + " simulate " + path("spec.json") + " -o " + path(tag + ".jsonl")) == 0);
    REQUIRE(run(extra + " aggregate " + path(tag + ".jsonl") + " -o " + path(tag + ".tracks.json")) == 0);
    REQUIRE(run(extra + " classify " + path(tag + ".tracks.json") + " -o " + path(tag + ".picture.json")) == 0);
    o.log = slurp(path(tag + ".jsonl"));
    o.tracks = slurp(path(tag + ".tracks.json"));
    o.picture = slurp(path(tag + ".picture.json"));
    return o;
}

}  // namespace

TEST_CASE("simulate writes the expected number of reports") {
    spit(path("spec.json"), kSpec);
    REQUIRE(run("simulate " + path("spec.json") + " -o " + path("sim.jsonl") + " --truth " + path("truth.json")) == 0);
    // 9 vehicles, 7 ticks, one observer in range of each
    CHECK(lines(slurp(path("sim.jsonl"))) == 63);
    auto truth = nlohmann::json::parse(slurp(path("truth.json")));
    CHECK(truth["vehicles"].size() == 9);
    CHECK(truth["units"].size() == 2);
}

TEST_CASE("simulate to stdout") {
    spit(path("spec.json"), kSpec);
    REQUIRE(run("simulate " + path("spec.json")) == 0);
    CHECK(lines(slurp(path("out.txt"))) == 63);
}

TEST_CASE("missing spec file names the path") {
    CHECK(run("simulate " + path("no-such-spec.json")) == 2);
    CHECK(slurp(path("err.txt")).find("no-such-spec.json") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("aggregate") == 1);
    CHECK(run("config") == 1);
    CHECK(run("aggregate x.jsonl --k-max many") == 1);
}

TEST_CASE("data errors exit with 2") {
    spit(path("bad.jsonl"), R"({"from":"o","position":{"x":0,"y":0},"time":0,"classification":"hovercraft","orientation":0})"
                            "\n");
    CHECK(run("aggregate " + path("bad.jsonl")) == 2);
    CHECK(slurp(path("err.txt")).find("line 1") != std::string::npos);
    spit(path("bad-config.json"), R"({"anneal": {"temperature": 1}})");
    CHECK(run("--config " + path("bad-config.json") + " config --dump") == 2);
}

TEST_CASE("seed override changes the log deterministically") {
    spit(path("spec.json"), kSpec);
    REQUIRE(run("--seed 11 simulate " + path("spec.json") + " -o " + path("s11a.jsonl")) == 0);
    REQUIRE(run("--seed 11 simulate " + path("spec.json") + " -o " + path("s11b.jsonl")) == 0);
    REQUIRE(run("simulate " + path("spec.json") + " -o " + path("s3.jsonl")) == 0);
    CHECK(slurp(path("s11a.jsonl")) == slurp(path("s11b.jsonl")));
    CHECK(slurp(path("s11a.jsonl")) != slurp(path("s3.jsonl")));
}

TEST_CASE("config dump reflects overrides") {
    REQUIRE(run("config --dump") == 0);
    auto defaults = nlohmann::json::parse(slurp(path("out.txt")));
    CHECK(defaults["conflict"]["speed"]["x1"] == 22.0);
    CHECK(defaults["cluster"]["threshold"] == 0.105);
    spit(path("cfg.json"), R"({"cluster": {"k_max": 7}})");
    REQUIRE(run("--config " + path("cfg.json") + " --seed 5 config --dump") == 0);
    auto over = nlohmann::json::parse(slurp(path("out.txt")));
    CHECK(over["cluster"]["k_max"] == 7);
    CHECK(over["seed"] == 5);
    // the dump is itself a valid config
    spit(path("dumped.json"), slurp(path("out.txt")));
    REQUIRE(run("--config " + path("dumped.json") + " config --dump") == 0);
    CHECK(nlohmann::json::parse(slurp(path("out.txt"))) == over);
}

TEST_CASE("full pipeline and score") {
    auto o = pipeline("run");
    auto tracks = nlohmann::json::parse(o.tracks);
    CHECK(tracks["tracks"].size() == 9);
    auto picture = nlohmann::json::parse(o.picture);
    CHECK(picture["units"].size() == 2);
    REQUIRE(run("score " + path("run.picture.json") + " " + path("run.jsonl")) == 0);
    auto m = nlohmann::json::parse(slurp(path("out.txt")));
    CHECK(m["purity"] == 1.0);
    CHECK(m["unit_precision"] == 1.0);
    CHECK(m["unit_recall"] == 1.0);
}

TEST_CASE("score without names fails") {
    auto o = pipeline("anon");
    std::string stripped;
    std::istringstream in(o.log);
    for (std::string line; std::getline(in, line);) {
        auto doc = nlohmann::ordered_json::parse(line);
        doc["name"] = nullptr;
        stripped += doc.dump() + "\n";
    }
    spit(path("anon-stripped.jsonl"), stripped);
    CHECK(run("score " + path("anon.picture.json") + " " + path("anon-stripped.jsonl")) == 2);
}

TEST_CASE("trace and decision log") {
    spit(path("spec.json"), kSpec);
    REQUIRE(run("simulate " + path("spec.json") + " -o " + path("t.jsonl")) == 0);
    REQUIRE(run("aggregate " + path("t.jsonl") + " -o " + path("t.tracks.json") + " --trace " + path("t.csv")) == 0);
    auto csv = slurp(path("t.csv"));
    CHECK(csv.rfind("sweep,step,temperature,saturation\n", 0) == 0);
    CHECK(lines(csv) > 2);
    REQUIRE(run("classify " + path("t.tracks.json") + " -o " + path("t.pic.json") + " --decision-log " +
                path("t.decisions.json")) == 0);
    auto log = nlohmann::json::parse(slurp(path("t.decisions.json")));
    CHECK(log["subproblems"] == 2);
    CHECK(log["explored"] > 0);
}

TEST_CASE("aggregate flags override the config") {
    spit(path("spec.json"), kSpec);
    REQUIRE(run("simulate " + path("spec.json") + " -o " + path("f.jsonl")) == 0);
    REQUIRE(run("aggregate " + path("f.jsonl") + " --k-max 2") == 0);
    auto doc = nlohmann::json::parse(slurp(path("out.txt")));
    CHECK(doc["weight_by_k"].size() <= 2);
    CHECK(doc["k"] <= 2);
}

TEST_CASE("empty tracks give an empty picture") {
    spit(path("empty.jsonl"), "");
    REQUIRE(run("aggregate " + path("empty.jsonl") + " -o " + path("empty.tracks.json")) == 0);
    REQUIRE(run("classify " + path("empty.tracks.json")) == 0);
    auto pic = nlohmann::json::parse(slurp(path("out.txt")));
    CHECK(pic["units"].empty());
    CHECK(pic["unaggregated"].empty());
    CHECK(pic["tracks"].empty());
}

TEST_CASE("pipeline outputs are byte-identical across runs") {
    auto a = pipeline("det-a");
    auto b = pipeline("det-b");
    CHECK(a.log == b.log);
    CHECK(a.tracks == b.tracks);
    CHECK(a.picture == b.picture);
}
