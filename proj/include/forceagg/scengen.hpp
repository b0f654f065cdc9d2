#pragma once
// Synthetic scenarios: ground-truth units moving along waypoint paths, seen by
// observers whose classification gets coarser with range.

#include "forceagg/domain.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forceagg {

struct UnitSpec {
    std::string unit_type;
    Position start;
    std::vector<Position> waypoints;  // visited in order after `start`
    double speed = 5.0;               // m/s
    double spacing = 100.0;           // line-abreast interval, meters
};

struct ObserverSpec {
    std::string id;
    std::vector<Position> path;  // one point = static observer
    double speed = 0.0;          // along `path`, m/s
    std::optional<double> max_range;
};

// Reports within `max_range` meters reveal the class truncated to `depth`.
struct CoarseningRange {
    double max_range = 0.0;
    int depth = 0;
};

struct ScenarioSpec {
    std::uint64_t seed = 1;
    double duration = 60.0;
    double report_period = 10.0;
    double position_sigma = 15.0;
    double orientation_sigma = 0.1;
    std::vector<CoarseningRange> coarsening{{1000.0, 99}, {2500.0, 1}, {4000.0, 0}};
    std::vector<UnitSpec> units;
    std::vector<ObserverSpec> observers;
};

// Throws DataError on an inconsistent spec.
void validate(const ScenarioSpec& spec);

ScenarioSpec load_scenario(std::istream& in);
std::string scenario_to_json(const ScenarioSpec& spec);

struct TruthVehicle {
    std::string name;
    ClassId class_id;
};

struct TruthUnit {
    std::string name;
    std::string unit_type;
    std::vector<std::string> vehicles;
};

struct GroundTruth {
    std::vector<TruthVehicle> vehicles;
    std::vector<TruthUnit> units;
};

struct Scenario {
    GroundTruth truth;
    std::vector<Report> reports;  // ordered by time, observer, vehicle
};

// Unit i of the spec is named "<unit_type>-<i>" and its vehicles
// "<unit name>.<k>"; report names carry the vehicle name. Throws DataError for
// unit types without a level-1 template or an invalid spec.
Scenario generate_scenario(const ScenarioSpec& spec, std::span<const UnitTemplate> templates,
                           const ClassificationTree& tree);

// Noise-free position of vehicle `index` of `count` abreast at time t.
Position vehicle_position(const UnitSpec& unit, int index, int count, double t);

struct ScoreMetrics {
    double purity = 0.0;
    double pair_precision = 0.0;
    double pair_recall = 0.0;
    int vehicle_count_error = 0;  // tracks - true vehicles
    double unit_precision = 0.0;
    double unit_recall = 0.0;
};

// `reports` is the scored log (with names), `picture` the pipeline output whose
// track report_ids index into it. Throws DataError when a report lacks a name.
ScoreMetrics score(const SituationPicture& picture, std::span<const Report> reports, const GroundTruth& truth);

// Ground truth implied by report names of the form "<unit_type>-<i>.<k>".
// Vehicle classes are the deepest reported ones. Throws DataError on unnamed
// reports.
GroundTruth truth_from_reports(std::span<const Report> reports, const ClassificationTree& tree);

}  // namespace forceagg
