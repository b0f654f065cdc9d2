#include "forceagg/conflict.hpp"
#include "forceagg/error.hpp"
#include "forceagg/scengen.hpp"

#include <doctest.h>

#include <map>
#include <set>
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

ScenarioSpec one_platoon(Position observer) {
    ScenarioSpec spec;
    spec.units.push_back({"mech_platoon", {0, 0}, {{0, 1000}}, 5.0, 100.0});
    spec.observers.push_back({"obs", {observer}, 0.0, {}});
    return spec;
}

std::string log_text(const std::vector<Report>& reports) {
    std::ostringstream out;
    write_report_log(out, reports);
    return out.str();
}

// One track per true vehicle.
SituationPicture perfect_tracks(const std::vector<Report>& reports) {
    std::map<std::string, std::vector<std::size_t>> by_name;
    for (std::size_t i = 0; i < reports.size(); ++i) by_name[*reports[i].name].push_back(i);
    SituationPicture p;
    for (const auto& [name, ids] : by_name) {
        std::vector<Report> rs;
        for (auto i : ids) rs.push_back(reports[i]);
        p.tracks.push_back(make_track(static_cast<TrackId>(p.tracks.size()), rs, ids, tree()));
    }
    return p;
}

}  // namespace

TEST_CASE("one platoon at close range") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    CHECK(sc.reports.size() == 28);
    for (const auto& r : sc.reports) CHECK(r.classification == "apc_tracked");
    REQUIRE(sc.truth.units.size() == 1);
    CHECK(sc.truth.units[0].name == "mech_platoon-0");
    CHECK(sc.truth.units[0].vehicles.size() == 4);
    CHECK(sc.truth.vehicles.size() == 4);
    std::set<std::string> names;
    for (const auto& r : sc.reports) names.insert(*r.name);
    CHECK(names == std::set<std::string>{"mech_platoon-0.0", "mech_platoon-0.1", "mech_platoon-0.2",
                                         "mech_platoon-0.3"});
}

TEST_CASE("classification coarsens with distance") {
    auto mid = generate_scenario(one_platoon({-2000, 500}), templates(), tree());
    REQUIRE_FALSE(mid.reports.empty());
    for (const auto& r : mid.reports) CHECK(r.classification == "tracked");
    auto far = generate_scenario(one_platoon({-3000, 500}), templates(), tree());
    REQUIRE(far.reports.size() == 28);
    for (const auto& r : far.reports) CHECK(r.classification == "unknown");
    auto gone = generate_scenario(one_platoon({-9000, 500}), templates(), tree());
    CHECK(gone.reports.empty());
}

TEST_CASE("observer max range limits reports") {
    auto spec = one_platoon({-300, 0});
    spec.observers[0].max_range = 100.0;
    auto sc = generate_scenario(spec, templates(), tree());
    CHECK(sc.reports.empty());
}

TEST_CASE("zero noise on a straight path gives the spec speed") {
    auto spec = one_platoon({-300, 0});
    spec.position_sigma = 0.0;
    spec.orientation_sigma = 0.0;
    auto sc = generate_scenario(spec, templates(), tree());
    std::map<std::string, std::vector<Report>> by_name;
    for (const auto& r : sc.reports) by_name[*r.name].push_back(r);
    for (const auto& [name, rs] : by_name) {
        REQUIRE(rs.size() == 7);
        for (std::size_t i = 1; i < rs.size(); ++i) {
            double v = distance(rs[i].position, rs[i - 1].position) / (rs[i].time - rs[i - 1].time);
            CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
            CHECK(rs[i].orientation == doctest::Approx(kPi / 2));
        }
    }
}

TEST_CASE("zero-noise reports of one vehicle are mutually consistent") {
    ScenarioSpec spec;
    spec.position_sigma = 0.0;
    spec.orientation_sigma = 0.0;
    spec.units.push_back({"mbt_platoon", {0, 0}, {{1000, 0}, {1000, 1000}}, 8.0, 150.0});
    spec.units.push_back({"at_platoon", {500, -800}, {{-500, -800}}, 12.0, 60.0});
    spec.observers.push_back({"near", {{400, -300}}, 0.0, {}});
    spec.observers.push_back({"rover", {{-1500, 0}, {1500, 0}}, 20.0, {}});
    spec.duration = 120;
    auto sc = generate_scenario(spec, templates(), tree());
    REQUIRE(sc.reports.size() > 100);
    const RampParams speed{0.01, 22.0, 25.0};
    for (std::size_t i = 0; i < sc.reports.size(); ++i) {
        for (std::size_t j = i + 1; j < sc.reports.size(); ++j) {
            const auto& a = sc.reports[i];
            const auto& b = sc.reports[j];
            if (*a.name != *b.name) continue;
            CHECK(speed_conflict(a, b, speed) < 0.01);
            CHECK(type_conflict(a.classification, b.classification, tree()) == 0.0);
        }
    }
}

TEST_CASE("vehicles ride line abreast across the heading") {
    UnitSpec u{"mech_platoon", {0, 0}, {{0, 1000}}, 5.0, 100.0};
    CHECK(vehicle_position(u, 0, 4, 0).x == doctest::Approx(150.0));
    CHECK(vehicle_position(u, 3, 4, 0).x == doctest::Approx(-150.0));
    CHECK(vehicle_position(u, 1, 4, 10).y == doctest::Approx(50.0));
    // holds at the last waypoint
    CHECK(vehicle_position(u, 0, 4, 1e6).y == doctest::Approx(1000.0));
}

TEST_CASE("generation is deterministic under seed") {
    ScenarioSpec spec = one_platoon({-300, 0});
    spec.units.push_back({"mbt_platoon", {3000, 0}, {{3000, 1000}}, 5.0, 100.0});
    spec.observers.push_back({"obs2", {{3300, 0}}, 0.0, {}});
    auto a = generate_scenario(spec, templates(), tree());
    auto b = generate_scenario(spec, templates(), tree());
    CHECK(log_text(a.reports) == log_text(b.reports));
    spec.seed = 2;
    auto c = generate_scenario(spec, templates(), tree());
    CHECK(log_text(a.reports) != log_text(c.reports));
}

TEST_CASE("spec validation and loading") {
    auto spec = one_platoon({0, 0});
    spec.units[0].unit_type = "hovercraft_squadron";
    CHECK_THROWS_AS(generate_scenario(spec, templates(), tree()), DataError);
    spec = one_platoon({0, 0});
    spec.report_period = 0;
    CHECK_THROWS_AS(validate(spec), DataError);
    spec = one_platoon({0, 0});
    spec.position_sigma = -1;
    CHECK_THROWS_AS(validate(spec), DataError);

    std::istringstream in(scenario_to_json(one_platoon({-300, 0})));
    auto back = load_scenario(in);
    CHECK(log_text(generate_scenario(back, templates(), tree()).reports) ==
          log_text(generate_scenario(one_platoon({-300, 0}), templates(), tree()).reports));

    std::istringstream bad(R"({"units": 3})");
    CHECK_THROWS_AS(load_scenario(bad), DataError);
}

TEST_CASE("truth from report names") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    auto truth = truth_from_reports(sc.reports, tree());
    REQUIRE(truth.units.size() == 1);
    CHECK(truth.units[0].unit_type == "mech_platoon");
    CHECK(truth.units[0].vehicles == sc.truth.units[0].vehicles);
    CHECK(truth.vehicles.size() == 4);
    sc.reports[3].name.reset();
    CHECK_THROWS_AS(truth_from_reports(sc.reports, tree()), DataError);
}

TEST_CASE("score: perfect recovery") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    auto pic = perfect_tracks(sc.reports);
    pic.units.push_back({{0, 1, 2, 3}, {{"mech_platoon", 0, 1, 0}}, 0, 0});
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.purity == 1.0);
    CHECK(m.pair_precision == 1.0);
    CHECK(m.pair_recall == 1.0);
    CHECK(m.vehicle_count_error == 0);
    CHECK(m.unit_precision == 1.0);
    CHECK(m.unit_recall == 1.0);
}

TEST_CASE("score: everything in one cluster") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    std::vector<std::size_t> ids(sc.reports.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    SituationPicture pic;
    // one blob; classes agree so the track is well formed
    pic.tracks.push_back(make_track(0, sc.reports, ids, tree()));
    pic.unaggregated = {0};
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.purity == 0.25);
    CHECK(m.pair_recall == 1.0);
    CHECK(m.pair_precision == doctest::Approx(4.0 * 21.0 / (28.0 * 27.0 / 2.0)));
    CHECK(m.vehicle_count_error == -3);
    CHECK(m.unit_recall == 0.0);
    CHECK(m.unit_precision == 0.0);
}

TEST_CASE("score: empty picture against non-empty truth") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    auto pic = perfect_tracks(sc.reports);
    pic.unaggregated = {0, 1, 2, 3};
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.unit_recall == 0.0);
    CHECK(m.unit_precision == 0.0);
    CHECK(m.purity == 1.0);
}

TEST_CASE("score: a wrong type is not a match") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    auto pic = perfect_tracks(sc.reports);
    pic.units.push_back({{0, 1, 2, 3}, {{"mbt_platoon", 0, 1, 0}}, 0, 0});
    auto m = score(pic, sc.reports, sc.truth);
    CHECK(m.unit_precision == 0.0);
    CHECK(m.unit_recall == 0.0);
}

TEST_CASE("score: unnamed reports are an error") {
    auto sc = generate_scenario(one_platoon({-300, 0}), templates(), tree());
    auto pic = perfect_tracks(sc.reports);
    sc.reports[0].name.reset();
    CHECK_THROWS_AS(score(pic, sc.reports, sc.truth), DataError);
}
