#include "forceagg/error.hpp"
#include "forceagg/pipeline.hpp"
#include "forceagg/scengen.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <sstream>

using namespace forceagg;

namespace {

const ClassificationTree& tree() {
    static const ClassificationTree t = ClassificationTree::default_tree();
    return t;
}

const std::vector<UnitTemplate>& templates() {
    static const std::vector<UnitTemplate> ts = default_templates();
    return ts;
}

// Mech platoon and MBT platoon 5 km apart, each watched by its own observer.
ScenarioSpec two_platoons(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.position_sigma = 2.0;
    spec.orientation_sigma = 0.05;
    // 8 s between looks: two vehicles 200 m apart cannot swap without a speed miss
    spec.report_period = 8.0;
    spec.duration = 48.0;
    spec.units.push_back({"mech_platoon", {0, 0}, {{0, 1000}}, 1.0, 200.0});
    spec.units.push_back({"mbt_platoon", {5000, 0}, {{5000, 1000}}, 1.0, 200.0});
    spec.observers.push_back({"obs-a", {{-600, 0}}, 0.0, 2000.0});
    spec.observers.push_back({"obs-b", {{5600, 0}}, 0.0, 2000.0});
    return spec;
}

PipelineConfig config_from(const std::string& text) {
    std::istringstream in(text);
    return load_config(in);
}

Report at(double x, double y, double t, ClassId cls) {
    return Report{"o", {}, {x, y}, t, std::move(cls), 0.0};
}

}  // namespace

TEST_CASE("config defaults") {
    PipelineConfig cfg;
    CHECK(cfg.conflicts.speed.p == 0.01);
    CHECK(cfg.conflicts.speed.x1 == 22.0);
    CHECK(cfg.conflicts.speed.x2 == 25.0);
    CHECK(cfg.conflicts.distance.x1 == 300.0);
    CHECK(cfg.conflicts.distance.x2 == 1000.0);
    CHECK(cfg.anneal.gamma == 0.5);
    CHECK(cfg.anneal.epsilon == 0.001);
    CHECK(cfg.anneal.tau == 0.9);
    CHECK(cfg.cluster_threshold == 0.105);
    CHECK(cfg.classify.keep_threshold == 0.5);
    CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("config round trip and overrides") {
    PipelineConfig cfg;
    auto text = config_to_json(cfg);
    CHECK(config_to_json(config_from(text)) == text);

    auto partial = config_from(R"({"seed": 9, "anneal": {"tau": 0.8, "alpha_by_k": {"2": 0.5}}, "cluster": {"k_max": 4}})");
    CHECK(partial.seed == 9);
    CHECK(partial.anneal.tau == 0.8);
    CHECK(partial.anneal.alpha_by_k == std::map<int, double>{{2, 0.5}});
    CHECK(partial.k_max == 4);
    CHECK(partial.anneal.gamma == 0.5);

    CHECK_THROWS_AS(config_from(R"({"anneal": {"temperature": 3}})"), DataError);
    CHECK_THROWS_AS(config_from(R"({"bogus": 1})"), DataError);
    CHECK_THROWS_AS(config_from(R"({"anneal": {"tau": 1.5}})"), DataError);
    CHECK_THROWS_AS(config_from(R"({"anneal": {"alpha_by_k": {"two": 1}}})"), DataError);
    CHECK_THROWS_AS(config_from("{nope"), DataError);
}

TEST_CASE("aggregate: one vehicle is one track") {
    std::vector<Report> rs;
    for (int t = 0; t <= 60; t += 10) rs.push_back(at(0, 5.0 * t, t, "mbt"));
    auto r = aggregate_reports(rs, tree(), PipelineConfig{});
    REQUIRE(r.tracks.size() == 1);
    CHECK(r.tracks[0].reports.size() == 7);
    CHECK(r.k == 1);
    CHECK(r.metaconflict < 0.105);
    CHECK(r.warnings.empty());
}

TEST_CASE("aggregate: empty log") {
    auto r = aggregate_reports(std::vector<Report>{}, tree(), PipelineConfig{});
    CHECK(r.tracks.empty());
    CHECK(r.metaconflict == 0.0);
}

TEST_CASE("aggregate: two platoons give nine tracks") {
    auto sc = generate_scenario(two_platoons(3), templates(), tree());
    auto r = aggregate_reports(sc.reports, tree(), PipelineConfig{});
    CHECK(r.tracks.size() == 9);
    SituationPicture pic;
    pic.tracks = r.tracks;
    for (const auto& t : r.tracks) pic.unaggregated.push_back(t.id);
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.purity == 1.0);
    CHECK(m.pair_recall == 1.0);
}

TEST_CASE("aggregate: per-track conflicts recombine to the metaconflict") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto spec = two_platoons(seed);
        spec.position_sigma = 25.0;  // noisier, so clusters keep some conflict
        auto sc = generate_scenario(spec, templates(), tree());
        auto r = aggregate_reports(sc.reports, tree(), PipelineConfig{});
        double keep = 1.0;
        for (double c : r.track_conflicts) keep *= 1.0 - c;
        CHECK(std::fabs((1.0 - keep) - r.metaconflict) <= 1e-9);
        CHECK(r.track_conflicts.size() == r.tracks.size());
    }
}

TEST_CASE("aggregate: class-inconsistent clusters are split") {
    // a threshold nothing misses keeps K at 1, leaving an MBT and an APC together
    PipelineConfig cfg;
    cfg.cluster_threshold = 1e9;
    std::vector<Report> rs{at(0, 0, 0, "mbt"), at(1, 0, 10, "apc_tracked"), at(0, 1, 20, "mbt"),
                           at(2, 0, 30, "apc_tracked"), at(0, 0, 40, "tracked")};
    auto r = aggregate_reports(rs, tree(), cfg);
    CHECK(r.k == 1);
    REQUIRE(r.tracks.size() == 2);
    CHECK_FALSE(r.warnings.empty());
    std::size_t total = 0;
    for (const auto& t : r.tracks) {
        total += t.reports.size();
        for (std::size_t i = 0; i < t.reports.size(); ++i) {
            for (std::size_t j = i + 1; j < t.reports.size(); ++j) {
                CHECK(is_descendant(t.reports[i].classification, t.reports[j].classification, tree()));
            }
        }
    }
    CHECK(total == rs.size());
}

TEST_CASE("tracks document round trip") {
    auto sc = generate_scenario(two_platoons(3), templates(), tree());
    auto r = aggregate_reports(sc.reports, tree(), PipelineConfig{});
    auto text = tracks_to_json(r);
    std::istringstream in(text);
    auto back = load_tracks(in, tree());
    REQUIRE(back.size() == r.tracks.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == r.tracks[i].id);
        CHECK(back[i].report_ids == r.tracks[i].report_ids);
        CHECK(back[i].resolved_class == r.tracks[i].resolved_class);
        CHECK(back[i].reports == r.tracks[i].reports);
    }
    auto doc = nlohmann::json::parse(text);
    CHECK(doc["k"] == r.k);
    CHECK(doc["tracks"].size() == r.tracks.size());
}

TEST_CASE("trace CSV") {
    std::vector<TraceRow> rows{{1, 0, 2.5, 0.25}, {2, 1, 2.25, 0.5}};
    auto csv = trace_to_csv(rows);
    CHECK(csv.rfind("sweep,step,temperature,saturation\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("end to end: two platoons recovered with their types") {
    auto sc = generate_scenario(two_platoons(3), templates(), tree());
    PipelineConfig cfg;
    auto r = aggregate_reports(sc.reports, tree(), cfg);
    auto pic = classify_units(r.tracks, templates(), tree(), cfg.conflicts, cfg.classify);
    REQUIRE(pic.units.size() == 2);
    CHECK(pic.unaggregated.empty());
    std::vector<std::string> types;
    for (const auto& u : pic.units) {
        types.push_back(u.types.front().unit_type);
        CHECK(u.types.front().classification_conflict == 0.0);
    }
    std::sort(types.begin(), types.end());
    CHECK(types == std::vector<std::string>{"mbt_platoon", "mech_platoon"});
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.unit_precision == 1.0);
    CHECK(m.unit_recall == 1.0);
}

TEST_CASE("picture document round trip") {
    auto sc = generate_scenario(two_platoons(3), templates(), tree());
    PipelineConfig cfg;
    auto r = aggregate_reports(sc.reports, tree(), cfg);
    auto pic = classify_units(r.tracks, templates(), tree(), cfg.conflicts, cfg.classify);
    auto text = picture_to_json(pic);
    std::istringstream in(text);
    auto back = load_picture(in, tree());
    CHECK(picture_to_json(back) == text);

    std::istringstream broken(R"({"tracks": [], "units": [{"members": [4], "types": [], "formation_conflict": 0, "conflict": 0}], "unaggregated": []})");
    CHECK_THROWS_AS(load_picture(broken, tree()), DataError);
}

TEST_CASE("empty tracks give an empty picture") {
    AggregateResult none;
    std::istringstream in(tracks_to_json(none));
    auto tracks = load_tracks(in, tree());
    CHECK(tracks.empty());
    auto pic = classify_units(tracks, templates(), tree(), ConflictConfig{}, ClassifyConfig{});
    CHECK(pic.units.empty());
    CHECK(pic.unaggregated.empty());
}

TEST_CASE("three MBT tracks make a platoon at conflict 0.4") {
    std::vector<Track> tracks;
    for (int v = 0; v < 3; ++v) {
        std::vector<Report> rs;
        for (int t = 0; t <= 60; t += 10) rs.push_back(at(100.0 * v, 2.0 * t, t, "mbt"));
        tracks.push_back(make_track(v, rs, {0, 1, 2, 3, 4, 5, 6}, tree()));
    }
    PipelineConfig cfg;
    // 100-200 m apart: distance conflict 0.01 * d / 300 per pair
    auto pic = classify_units(tracks, templates(), tree(), cfg.conflicts, cfg.classify);
    REQUIRE(pic.units.size() == 1);
    CHECK(pic.units[0].types.front().unit_type == "mbt_platoon");
    CHECK(pic.units[0].types.front().classification_conflict == doctest::Approx(0.4).epsilon(1e-15));
    double c1 = (0.01 / 3 + 0.01 / 3 + 0.02 / 3) / 3;
    CHECK(pic.units[0].conflict == doctest::Approx(1 - 0.6 * (1 - c1)).epsilon(1e-12));
}

TEST_CASE("decision log") {
    ElementSet e;
    e.ids = {0, 1};
    e.classes = {"apc_tracked", "mbt"};
    e.conflicts = Eigen::MatrixXd::Zero(2, 2);
    auto r = classify_elements(e, templates(), tree(), ClassifyConfig{});
    auto doc = nlohmann::json::parse(decision_log_to_json(r));
    CHECK(doc["candidates"] == 3);
    CHECK(doc["pruned"].size() == 1);
    CHECK(doc["pruned"][0]["reason"] == "type");
    CHECK(doc["subproblems"] == 2);
}
