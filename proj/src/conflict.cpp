#include "forceagg/conflict.hpp"

#include "forceagg/error.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace forceagg {

namespace {

// Reports closer than this at the same instant are duplicate sightings.
constexpr double kDuplicateRadius = 1.0;

// Below this chord length a track's heading is undefined.
constexpr double kMinChord = 1e-9;

}  // namespace

void validate(const RampParams& p) {
    if (!(p.p >= 0.0 && p.p <= 1.0)) throw DataError("ramp: p must lie in [0, 1]");
    if (!(p.x1 >= 0.0 && p.x1 < p.x2)) throw DataError("ramp: need 0 <= x1 < x2");
}

void validate(const DirectionParams& p) {
    if (!(p.delta_d0 > 0.0 && p.delta_d0 <= kPi)) throw DataError("direction: delta_d0 must lie in (0, pi]");
    if (!(p.delta_t0 > 0.0)) throw DataError("direction: delta_t0 must be positive");
    if (!(p.k > 0.0)) throw DataError("direction: k must be positive");
}

void validate(const ConflictConfig& c) {
    validate(c.speed);
    validate(c.direction);
    validate(c.distance);
    validate(c.heading);
}

double ramp_conflict(double x, const RampParams& params) {
    x = std::max(x, 0.0);
    if (x < params.x1) return x * params.p / params.x1;
    if (x < params.x2) return ((x - params.x1) + params.p * (params.x2 - x)) / (params.x2 - params.x1);
    return 1.0;
}

double combine_aspects(std::span<const double> conflicts) {
    double keep = 1.0;
    for (double c : conflicts) keep *= 1.0 - c;
    return 1.0 - keep;
}

double combine_aspects(std::initializer_list<double> conflicts) {
    return combine_aspects(std::span<const double>(conflicts.begin(), conflicts.size()));
}

double speed_conflict(const Report& a, const Report& b, const RampParams& params) {
    double dist = distance(a.position, b.position);
    double dt = std::fabs(a.time - b.time);
    if (dt == 0.0) return dist > kDuplicateRadius ? 1.0 : 0.0;
    return ramp_conflict(dist / dt, params);
}

double type_conflict(const ClassId& a, const ClassId& b, const ClassificationTree& tree) {
    return is_descendant(a, b, tree) ? 0.0 : 1.0;
}

double direction_conflict(double delta_heading, double delta_time, const DirectionParams& params) {
    if (delta_time <= params.delta_t0 && delta_heading >= params.delta_d0) {
        double c = params.k * delta_heading / (kPi * (params.k + delta_time));
        assert(c <= 1.0 + 1e-12);
        return std::clamp(c, 0.0, 1.0);
    }
    return 0.0;
}

double direction_conflict(const Report& a, const Report& b, const DirectionParams& params) {
    return direction_conflict(angular_difference(a.orientation, b.orientation), std::fabs(a.time - b.time),
                              params);
}

double report_conflict(const Report& a, const Report& b, const ClassificationTree& tree,
                       const ConflictConfig& config) {
    double type = type_conflict(a.classification, b.classification, tree);
    if (type == 1.0) return 1.0;
    return combine_aspects({speed_conflict(a, b, config.speed), type, direction_conflict(a, b, config.direction)});
}

Position position_at(const Track& track, double t) {
    const auto& rs = track.reports;
    if (rs.empty() || t < rs.front().time || t > rs.back().time) {
        throw DataError("position_at: time " + std::to_string(t) + " outside track " + std::to_string(track.id) +
                        " span");
    }
    // first report with time >= t
    auto hi = std::lower_bound(rs.begin(), rs.end(), t, [](const Report& r, double v) { return r.time < v; });
    if (hi->time == t) return hi->position;
    auto lo = std::prev(hi);
    double f = (t - lo->time) / (hi->time - lo->time);
    return {lo->position.x + f * (hi->position.x - lo->position.x),
            lo->position.y + f * (hi->position.y - lo->position.y)};
}

std::optional<std::pair<double, double>> common_interval(const Track& a, const Track& b) {
    double start = std::max(a.start_time(), b.start_time());
    double end = std::min(a.end_time(), b.end_time());
    if (start > end) return std::nullopt;
    return std::make_pair(start, end);
}

std::vector<double> sample_distances(const Track& a, const Track& b) {
    auto span = common_interval(a, b);
    if (!span) return {};
    std::vector<double> times;
    for (const auto* track : {&a, &b}) {
        for (const auto& r : track->reports) {
            if (r.time >= span->first && r.time <= span->second) times.push_back(r.time);
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(distance(position_at(a, t), position_at(b, t)));
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median of an empty set");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double distance_conflict(const Track& a, const Track& b, const RampParams& params) {
    auto samples = sample_distances(a, b);
    if (samples.empty()) {
        // no overlap: nearest reports in time, one from each track
        const Track& early = a.end_time() < b.start_time() ? a : b;
        const Track& late = &early == &a ? b : a;
        return ramp_conflict(distance(early.reports.back().position, late.reports.front().position), params);
    }
    return ramp_conflict(median(std::move(samples)), params);
}

double track_direction_conflict(const Track& a, const Track& b, const RampParams& params) {
    auto span = common_interval(a, b);
    if (!span || span->first == span->second) return 0.0;
    auto heading = [&](const Track& t) -> std::optional<double> {
        Position p0 = position_at(t, span->first);
        Position p1 = position_at(t, span->second);
        double dx = p1.x - p0.x;
        double dy = p1.y - p0.y;
        if (std::hypot(dx, dy) <= kMinChord) return std::nullopt;
        return std::atan2(dy, dx);
    };
    auto ha = heading(a);
    auto hb = heading(b);
    if (!ha || !hb) return 0.0;
    return ramp_conflict(angular_difference(*ha, *hb), params);
}

double track_conflict(const Track& a, const Track& b, const ConflictConfig& config) {
    return combine_aspects({distance_conflict(a, b, config.distance), track_direction_conflict(a, b, config.heading)});
}

}  // namespace forceagg
