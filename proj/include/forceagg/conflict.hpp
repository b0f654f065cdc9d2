#pragma once
// Pairwise conflict measures. Report-level aspects are speed, type and
// direction; track-level aspects are median distance and overall heading.
// Aspects are combined with Dempster's rule, C = 1 - prod(1 - C_a).

#include "forceagg/domain.hpp"

#include <initializer_list>
#include <optional>
#include <span>
#include <utility>

namespace forceagg {

// Piecewise-linear ramp: x*p/x1 below x1, linear from p to 1 on [x1, x2),
// 1 from x2 on.
struct RampParams {
    double p = 0.0;
    double x1 = 0.0;
    double x2 = 1.0;
};

struct DirectionParams {
    double delta_d0 = kPi / 4.0;  // smallest heading difference that counts
    double delta_t0 = 8.0;        // seconds after which headings are stale
    double k = 10.0;
};

struct ConflictConfig {
    RampParams speed{0.01, 22.0, 25.0};
    DirectionParams direction{};
    RampParams distance{0.01, 300.0, 1000.0};
    RampParams heading{0.0, 0.0, kPi};
};

// Throws DataError on out-of-range parameters.
void validate(const RampParams& p);
void validate(const DirectionParams& p);
void validate(const ConflictConfig& c);

double ramp_conflict(double x, const RampParams& params);

double combine_aspects(std::span<const double> conflicts);
double combine_aspects(std::initializer_list<double> conflicts);

// ---- reports ---------------------------------------------------------------

double speed_conflict(const Report& a, const Report& b, const RampParams& params);
double type_conflict(const ClassId& a, const ClassId& b, const ClassificationTree& tree);
double direction_conflict(const Report& a, const Report& b, const DirectionParams& params);

// Same, on raw heading/time differences.
double direction_conflict(double delta_heading, double delta_time, const DirectionParams& params);

double report_conflict(const Report& a, const Report& b, const ClassificationTree& tree,
                       const ConflictConfig& config);

// ---- tracks ----------------------------------------------------------------

// Linear interpolation between bracketing reports. Throws DataError outside
// the track's time span.
Position position_at(const Track& track, double t);

std::optional<std::pair<double, double>> common_interval(const Track& a, const Track& b);

// Distances between the two tracks at every distinct report time (of either
// track) inside the common interval. Empty when the interval is empty.
std::vector<double> sample_distances(const Track& a, const Track& b);

// Median with the even-count case averaging the middle pair.
double median(std::vector<double> values);

double distance_conflict(const Track& a, const Track& b, const RampParams& params);
double track_direction_conflict(const Track& a, const Track& b, const RampParams& params);
double track_conflict(const Track& a, const Track& b, const ConflictConfig& config);

}  // namespace forceagg
