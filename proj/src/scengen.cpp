#include "forceagg/scengen.hpp"

#include "forceagg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <random>
#include <set>

namespace forceagg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void validate(const ScenarioSpec& spec) {
    if (!(spec.report_period > 0.0)) throw DataError("scenario: report_period must be > 0");
    if (!(spec.duration >= 0.0)) throw DataError("scenario: duration must be >= 0");
    if (!(spec.position_sigma >= 0.0) || !(spec.orientation_sigma >= 0.0)) {
        throw DataError("scenario: noise sigmas must be >= 0");
    }
    for (std::size_t i = 0; i < spec.coarsening.size(); ++i) {
        const auto& c = spec.coarsening[i];
        if (!(c.max_range > 0.0) || c.depth < 0) throw DataError("scenario: bad coarsening range");
        if (i > 0 && !(c.max_range > spec.coarsening[i - 1].max_range)) {
            throw DataError("scenario: coarsening ranges must be strictly increasing");
        }
    }
    for (const auto& u : spec.units) {
        if (!(u.speed >= 0.0)) throw DataError("scenario: unit speed must be >= 0");
        if (!(u.spacing > 0.0)) throw DataError("scenario: unit spacing must be > 0");
    }
    std::set<std::string> ids;
    for (const auto& o : spec.observers) {
        if (o.path.empty()) throw DataError("scenario: observer '" + o.id + "' has no position");
        if (!(o.speed >= 0.0)) throw DataError("scenario: observer speed must be >= 0");
        if (o.max_range && !(*o.max_range > 0.0)) throw DataError("scenario: observer max_range must be > 0");
        if (!ids.insert(o.id).second) throw DataError("scenario: duplicate observer id '" + o.id + "'");
    }
}

namespace {

Position read_position(const json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>()};
}

ordered_json write_position(const Position& p) {
    return ordered_json{{"x", p.x}, {"y", p.y}};
}

// Point reached after travelling `s` meters along start -> waypoints, with
// the heading of the segment in use.
std::pair<Position, double> along_path(const Position& start, std::span<const Position> waypoints, double s) {
    Position at = start;
    double heading = 0.0;
    for (const auto& w : waypoints) {
        double len = distance(at, w);
        if (len <= 0.0) continue;
        heading = std::atan2(w.y - at.y, w.x - at.x);
        if (s <= len) {
            double f = s / len;
            return {{at.x + f * (w.x - at.x), at.y + f * (w.y - at.y)}, heading};
        }
        s -= len;
        at = w;
    }
    return {at, heading};
}

Position observer_position(const ObserverSpec& o, double t) {
    std::span<const Position> rest(o.path.begin() + 1, o.path.end());
    return along_path(o.path.front(), rest, o.speed * t).first;
}

}  // namespace

ScenarioSpec load_scenario(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("scenario: ") + e.what());
    }
    ScenarioSpec spec;
    try {
        spec.seed = doc.value("seed", spec.seed);
        spec.duration = doc.value("duration", spec.duration);
        spec.report_period = doc.value("report_period", spec.report_period);
        if (doc.contains("noise")) {
            const auto& n = doc["noise"];
            spec.position_sigma = n.value("position_sigma", spec.position_sigma);
            spec.orientation_sigma = n.value("orientation_sigma", spec.orientation_sigma);
        }
        if (doc.contains("coarsening")) {
            spec.coarsening.clear();
            for (const auto& c : doc["coarsening"]) {
                spec.coarsening.push_back({c.at("max_range").get<double>(), c.at("depth").get<int>()});
            }
        }
        for (const auto& u : doc.value("units", json::array())) {
            UnitSpec unit;
            unit.unit_type = u.at("unit_type").get<std::string>();
            unit.start = read_position(u.at("start"));
            for (const auto& w : u.value("waypoints", json::array())) unit.waypoints.push_back(read_position(w));
            unit.speed = u.value("speed", unit.speed);
            unit.spacing = u.value("spacing", unit.spacing);
            spec.units.push_back(std::move(unit));
        }
        for (const auto& o : doc.value("observers", json::array())) {
            ObserverSpec obs;
            obs.id = o.at("id").get<std::string>();
            if (o.contains("path")) {
                for (const auto& p : o["path"]) obs.path.push_back(read_position(p));
            } else {
                obs.path.push_back(read_position(o.at("position")));
            }
            obs.speed = o.value("speed", 0.0);
            if (o.contains("max_range") && !o["max_range"].is_null()) obs.max_range = o["max_range"].get<double>();
            spec.observers.push_back(std::move(obs));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("scenario: ") + e.what());
    }
    validate(spec);
    return spec;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
    ordered_json doc;
    doc["seed"] = spec.seed;
    doc["duration"] = spec.duration;
    doc["report_period"] = spec.report_period;
    doc["noise"] = {{"position_sigma", spec.position_sigma}, {"orientation_sigma", spec.orientation_sigma}};
    doc["coarsening"] = ordered_json::array();
    for (const auto& c : spec.coarsening) doc["coarsening"].push_back({{"max_range", c.max_range}, {"depth", c.depth}});
    doc["units"] = ordered_json::array();
    for (const auto& u : spec.units) {
        ordered_json w = ordered_json::array();
        for (const auto& p : u.waypoints) w.push_back(write_position(p));
        doc["units"].push_back({{"unit_type", u.unit_type},
                                {"start", write_position(u.start)},
                                {"waypoints", w},
                                {"speed", u.speed},
                                {"spacing", u.spacing}});
    }
    doc["observers"] = ordered_json::array();
    for (const auto& o : spec.observers) {
        ordered_json path = ordered_json::array();
        for (const auto& p : o.path) path.push_back(write_position(p));
        ordered_json obj{{"id", o.id}, {"path", path}, {"speed", o.speed}};
        obj["max_range"] = o.max_range ? ordered_json(*o.max_range) : ordered_json(nullptr);
        doc["observers"].push_back(std::move(obj));
    }
    return doc.dump(2);
}

Position vehicle_position(const UnitSpec& unit, int index, int count, double t) {
    auto [centre, heading] = along_path(unit.start, unit.waypoints, unit.speed * t);
    // abreast: offsets run perpendicular to the direction of travel
    double offset = (index - (count - 1) / 2.0) * unit.spacing;
    return {centre.x - std::sin(heading) * offset, centre.y + std::cos(heading) * offset};
}

namespace {

double vehicle_heading(const UnitSpec& unit, double t) {
    return normalize_angle(along_path(unit.start, unit.waypoints, unit.speed * t).second);
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec, std::span<const UnitTemplate> templates,
                           const ClassificationTree& tree) {
    validate(spec);
    struct Vehicle {
        std::size_t unit;
        int index;
        int count;
        std::string name;
        ClassId class_id;
    };
    Scenario out;
    std::vector<Vehicle> vehicles;
    for (std::size_t u = 0; u < spec.units.size(); ++u) {
        const auto& unit = spec.units[u];
        const UnitTemplate* t = find_template(templates, unit.unit_type);
        if (!t || t->level != 1) throw DataError("scenario: no vehicle-level template for '" + unit.unit_type + "'");
        TruthUnit tu{unit.unit_type + "-" + std::to_string(u), unit.unit_type, {}};
        const int count = t->total_count();
        int k = 0;
        for (const auto& slot : t->composition) {
            if (!tree.contains(slot.class_id)) throw DataError("scenario: unknown class '" + slot.class_id + "'");
            for (int c = 0; c < slot.count; ++c, ++k) {
                std::string name = tu.name + "." + std::to_string(k);
                vehicles.push_back({u, k, count, name, slot.class_id});
                out.truth.vehicles.push_back({name, slot.class_id});
                tu.vehicles.push_back(name);
            }
        }
        out.truth.units.push_back(std::move(tu));
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto noise = [&](double sigma) { return sigma > 0.0 ? sigma * gauss(rng) : 0.0; };

    const auto ticks = static_cast<long>(std::floor(spec.duration / spec.report_period + 1e-9));
    for (long tick = 0; tick <= ticks; ++tick) {
        const double t = static_cast<double>(tick) * spec.report_period;
        for (const auto& obs : spec.observers) {
            const Position eye = observer_position(obs, t);
            for (const auto& v : vehicles) {
                const UnitSpec& unit = spec.units[v.unit];
                const Position truth = vehicle_position(unit, v.index, v.count, t);
                const double range = distance(eye, truth);
                if (obs.max_range && range > *obs.max_range) continue;
                auto band = std::find_if(spec.coarsening.begin(), spec.coarsening.end(),
                                         [&](const CoarseningRange& c) { return range <= c.max_range; });
                if (band == spec.coarsening.end()) continue;
                Report r;
                r.from = obs.id;
                r.name = v.name;
                r.position = {truth.x + noise(spec.position_sigma), truth.y + noise(spec.position_sigma)};
                r.time = t;
                r.classification = tree.truncate(v.class_id, band->depth);
                r.orientation = normalize_angle(vehicle_heading(unit, t) + noise(spec.orientation_sigma));
                out.reports.push_back(std::move(r));
            }
        }
    }
    return out;
}

namespace {

std::string unit_of(const std::string& vehicle) {
    auto dot = vehicle.rfind('.');
    if (dot == std::string::npos || dot == 0) throw DataError("name '" + vehicle + "' is not of the form unit.k");
    return vehicle.substr(0, dot);
}

std::string type_of(const std::string& unit) {
    auto dash = unit.rfind('-');
    if (dash == std::string::npos || dash == 0) throw DataError("unit name '" + unit + "' is not of the form type-i");
    return unit.substr(0, dash);
}

const std::string& name_of(const Report& r) {
    if (!r.name) throw DataError("report from '" + r.from + "' at t=" + std::to_string(r.time) + " has no name");
    return *r.name;
}

double ratio(std::size_t num, std::size_t den, double empty) {
    return den == 0 ? empty : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

GroundTruth truth_from_reports(std::span<const Report> reports, const ClassificationTree& tree) {
    std::map<std::string, std::vector<ClassId>> classes;
    for (const auto& r : reports) classes[name_of(r)].push_back(r.classification);
    GroundTruth out;
    std::map<std::string, std::size_t> unit_index;
    for (const auto& [name, cls] : classes) {
        out.vehicles.push_back({name, resolve_class(cls, tree)});
        std::string unit = unit_of(name);
        auto [it, fresh] = unit_index.emplace(unit, out.units.size());
        if (fresh) out.units.push_back({unit, type_of(unit), {}});
        out.units[it->second].vehicles.push_back(name);
    }
    return out;
}

ScoreMetrics score(const SituationPicture& picture, std::span<const Report> reports, const GroundTruth& truth) {
    for (const auto& r : reports) name_of(r);
    ScoreMetrics m;

    // majority vehicle of each track, and per-track name counts
    std::map<TrackId, std::string> majority;
    std::size_t total = 0;
    std::size_t pure = 0;
    std::size_t same_track_pairs = 0;
    std::size_t same_track_same_name = 0;
    std::map<std::string, std::size_t> per_name;
    for (const auto& track : picture.tracks) {
        std::map<std::string, std::size_t> counts;
        for (auto id : track.report_ids) {
            if (id >= reports.size()) throw DataError("track " + std::to_string(track.id) + " references report " +
                                                      std::to_string(id) + " outside the log");
            ++counts[*reports[id].name];
        }
        std::size_t n = track.report_ids.size();
        total += n;
        same_track_pairs += n * (n - 1) / 2;
        std::size_t best = 0;
        for (const auto& [name, c] : counts) {
            same_track_same_name += c * (c - 1) / 2;
            per_name[name] += c;
            if (c > best) {
                best = c;
                majority[track.id] = name;
            }
        }
        pure += best;
    }
    std::size_t same_name_pairs = 0;
    std::map<std::string, std::size_t> in_log;
    for (const auto& r : reports) ++in_log[*r.name];
    for (const auto& [name, c] : in_log) same_name_pairs += c * (c - 1) / 2;

    m.purity = ratio(pure, total, 1.0);
    m.pair_precision = ratio(same_track_same_name, same_track_pairs, 1.0);
    m.pair_recall = ratio(same_track_same_name, same_name_pairs, 1.0);
    m.vehicle_count_error = static_cast<int>(picture.tracks.size()) - static_cast<int>(truth.vehicles.size());

    std::set<std::pair<std::set<std::string>, std::string>> truth_units;
    for (const auto& u : truth.units) {
        // single vehicles are not units to be found
        if (u.vehicles.size() < 2) continue;
        truth_units.insert({{u.vehicles.begin(), u.vehicles.end()}, u.unit_type});
    }
    std::size_t hits = 0;
    for (const auto& u : picture.units) {
        std::set<std::string> names;
        for (auto id : u.members) {
            auto it = majority.find(id);
            if (it != majority.end()) names.insert(it->second);
        }
        std::string type = u.types.empty() ? std::string() : u.types.front().unit_type;
        if (truth_units.count({names, type})) ++hits;
    }
    m.unit_precision = ratio(hits, picture.units.size(), truth_units.empty() ? 1.0 : 0.0);
    m.unit_recall = ratio(hits, truth_units.size(), 1.0);
    return m;
}

}  // namespace forceagg
