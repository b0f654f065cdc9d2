#include "forceagg/pipeline.hpp"

#include "forceagg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <optional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace forceagg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void validate(const PipelineConfig& cfg) {
    validate(cfg.conflicts);
    validate(cfg.anneal);
    validate(cfg.classify);
    if (cfg.k_max < 1) throw DataError("config: k_max must be >= 1");
    if (!(cfg.cluster_threshold > 0.0)) throw DataError("config: cluster threshold must be > 0");
}

// ---- config ----------------------------------------------------------------

namespace {

void allow_only(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw DataError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; });
        if (!known) throw DataError("config: unknown key '" + where + "." + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& into) {
    if (obj.contains(key)) into = obj.at(key).get<T>();
}

void read_ramp(const json& obj, const char* key, RampParams& r) {
    if (!obj.contains(key)) return;
    const json& j = obj.at(key);
    allow_only(j, std::string("conflict.") + key, {"p", "x1", "x2"});
    read(j, "p", r.p);
    read(j, "x1", r.x1);
    read(j, "x2", r.x2);
}

ordered_json ramp_json(const RampParams& r) {
    return ordered_json{{"p", r.p}, {"x1", r.x1}, {"x2", r.x2}};
}

}  // namespace

PipelineConfig load_config(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    PipelineConfig cfg;
    try {
        allow_only(doc, "", {"seed", "conflict", "anneal", "cluster", "classify"});
        read(doc, "seed", cfg.seed);
        if (doc.contains("conflict")) {
            const json& c = doc["conflict"];
            allow_only(c, "conflict", {"speed", "direction", "distance", "heading"});
            read_ramp(c, "speed", cfg.conflicts.speed);
            read_ramp(c, "distance", cfg.conflicts.distance);
            read_ramp(c, "heading", cfg.conflicts.heading);
            if (c.contains("direction")) {
                const json& d = c["direction"];
                allow_only(d, "conflict.direction", {"delta_d0", "delta_t0", "k"});
                read(d, "delta_d0", cfg.conflicts.direction.delta_d0);
                read(d, "delta_t0", cfg.conflicts.direction.delta_t0);
                read(d, "k", cfg.conflicts.direction.k);
            }
        }
        if (doc.contains("anneal")) {
            const json& a = doc["anneal"];
            allow_only(a, "anneal", {"gamma", "alpha_by_k", "alpha_beyond", "epsilon", "tau", "inner_tol",
                                     "freeze_tol", "row_max_tol", "max_sweeps", "restarts", "step", "max_inner"});
            read(a, "gamma", cfg.anneal.gamma);
            if (a.contains("alpha_by_k")) {
                cfg.anneal.alpha_by_k.clear();
                for (const auto& [k, v] : a["alpha_by_k"].items()) {
                    int key = 0;
                    try {
                        std::size_t used = 0;
                        key = std::stoi(k, &used);
                        if (used != k.size()) throw std::invalid_argument(k);
                    } catch (const std::exception&) {
                        throw DataError("config: anneal.alpha_by_k key '" + k + "' is not an integer");
                    }
                    cfg.anneal.alpha_by_k[key] = v.get<double>();
                }
            }
            read(a, "alpha_beyond", cfg.anneal.alpha_beyond);
            read(a, "epsilon", cfg.anneal.epsilon);
            read(a, "tau", cfg.anneal.tau);
            read(a, "inner_tol", cfg.anneal.inner_tol);
            read(a, "freeze_tol", cfg.anneal.freeze_tol);
            read(a, "row_max_tol", cfg.anneal.row_max_tol);
            read(a, "max_sweeps", cfg.anneal.max_sweeps);
            read(a, "restarts", cfg.anneal.restarts);
            read(a, "step", cfg.anneal.step);
            read(a, "max_inner", cfg.anneal.max_inner);
        }
        if (doc.contains("cluster")) {
            const json& c = doc["cluster"];
            allow_only(c, "cluster", {"k_max", "threshold"});
            read(c, "k_max", cfg.k_max);
            read(c, "threshold", cfg.cluster_threshold);
        }
        if (doc.contains("classify")) {
            const json& c = doc["classify"];
            allow_only(c, "classify", {"keep_threshold", "present_delta", "fallback_conflict", "per_track_cap"});
            read(c, "keep_threshold", cfg.classify.keep_threshold);
            read(c, "present_delta", cfg.classify.present_delta);
            read(c, "fallback_conflict", cfg.classify.fallback_conflict);
            read(c, "per_track_cap", cfg.classify.per_track_cap);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
    ordered_json doc;
    doc["seed"] = cfg.seed;
    doc["conflict"] = {{"speed", ramp_json(cfg.conflicts.speed)},
                       {"direction",
                        {{"delta_d0", cfg.conflicts.direction.delta_d0},
                         {"delta_t0", cfg.conflicts.direction.delta_t0},
                         {"k", cfg.conflicts.direction.k}}},
                       {"distance", ramp_json(cfg.conflicts.distance)},
                       {"heading", ramp_json(cfg.conflicts.heading)}};
    ordered_json alpha = ordered_json::object();
    for (const auto& [k, v] : cfg.anneal.alpha_by_k) alpha[std::to_string(k)] = v;
    doc["anneal"] = {{"gamma", cfg.anneal.gamma},
                     {"alpha_by_k", alpha},
                     {"alpha_beyond", cfg.anneal.alpha_beyond},
                     {"epsilon", cfg.anneal.epsilon},
                     {"tau", cfg.anneal.tau},
                     {"inner_tol", cfg.anneal.inner_tol},
                     {"freeze_tol", cfg.anneal.freeze_tol},
                     {"row_max_tol", cfg.anneal.row_max_tol},
                     {"max_sweeps", cfg.anneal.max_sweeps},
                     {"restarts", cfg.anneal.restarts},
                     {"step", cfg.anneal.step},
                     {"max_inner", cfg.anneal.max_inner}};
    doc["cluster"] = {{"k_max", cfg.k_max}, {"threshold", cfg.cluster_threshold}};
    doc["classify"] = {{"keep_threshold", cfg.classify.keep_threshold},
                       {"present_delta", cfg.classify.present_delta},
                       {"fallback_conflict", cfg.classify.fallback_conflict},
                       {"per_track_cap", cfg.classify.per_track_cap}};
    return doc.dump(2);
}

// ---- aggregation -------------------------------------------------------------

namespace {

bool class_consistent(std::span<const std::size_t> members, std::span<const Report> reports,
                      const ClassificationTree& tree) {
    std::vector<ClassId> classes;
    for (auto m : members) classes.push_back(reports[m].classification);
    try {
        resolve_class(classes, tree);
        return true;
    } catch (const DataError&) {
        return false;
    }
}

std::vector<std::vector<std::size_t>> split_by_class(const std::vector<std::size_t>& members,
                                                     std::span<const Report> reports,
                                                     const ClassificationTree& tree, const InteractionMatrix& J) {
    std::set<ClassId> present;
    for (auto m : members) present.insert(reports[m].classification);
    // most specific classes: no other present class lies below them
    std::vector<ClassId> leaves;
    for (const auto& c : present) {
        bool has_below = std::any_of(present.begin(), present.end(), [&](const ClassId& o) {
            return o != c && tree.is_ancestor_or_self(c, o);
        });
        if (!has_below) leaves.push_back(c);
    }
    std::vector<std::vector<std::size_t>> parts(leaves.size());
    std::vector<std::size_t> ambiguous;
    for (auto m : members) {
        std::vector<std::size_t> fits;
        for (std::size_t l = 0; l < leaves.size(); ++l) {
            if (tree.is_ancestor_or_self(reports[m].classification, leaves[l])) fits.push_back(l);
        }
        if (fits.size() == 1) {
            parts[fits.front()].push_back(m);
        } else {
            ambiguous.push_back(m);
        }
    }
    for (auto m : ambiguous) {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < leaves.size(); ++l) {
            if (!tree.is_ancestor_or_self(reports[m].classification, leaves[l])) continue;
            double cost = 0.0;
            for (auto o : parts[l]) cost += J(m, o);
            if (cost < best_cost) {
                best_cost = cost;
                best = l;
            }
        }
        parts[best].push_back(m);
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return parts;
}

}  // namespace

AggregateResult aggregate_reports(std::span<const Report> reports, const ClassificationTree& tree,
                                  const PipelineConfig& cfg) {
    validate(cfg);
    AggregateResult out;
    if (reports.empty()) return out;

    const std::size_t n = reports.size();
    Eigen::MatrixXd conflicts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double c = report_conflict(reports[i], reports[j], tree, cfg.conflicts);
            conflicts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
            conflicts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
        }
    }
    PairConflict pair = [&](std::size_t i, std::size_t j) {
        return conflicts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    InteractionMatrix J = build_interactions(n, pair);

    AnnealConfig anneal = cfg.anneal;
    anneal.seed = cfg.seed;
    ClusterCountResult chosen = select_cluster_count(J, pair, cfg.k_max, cfg.cluster_threshold, anneal);
    out.k = chosen.k;
    out.weight_by_k = chosen.weight_by_k;
    out.trace = chosen.anneal.trace;

    std::vector<std::vector<std::size_t>> groups;
    for (auto& members : clusters_of(chosen.partition)) {
        if (class_consistent(members, reports, tree)) {
            groups.push_back(std::move(members));
            continue;
        }
        auto parts = split_by_class(members, reports, tree, J);
        out.warnings.push_back("cluster starting at report " + std::to_string(members.front()) +
                               " mixed incompatible classes; split into " + std::to_string(parts.size()));
        for (auto& p : parts) {
            if (!p.empty()) groups.push_back(std::move(p));
        }
    }
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    Partition final_partition;
    final_partition.k = static_cast<int>(groups.size());
    final_partition.assignment.assign(n, 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<Report> rs;
        for (auto m : groups[g]) {
            rs.push_back(reports[m]);
            final_partition.assignment[m] = static_cast<int>(g);
        }
        out.tracks.push_back(make_track(static_cast<TrackId>(g), std::move(rs), groups[g], tree));
    }
    out.track_conflicts = cluster_conflicts(final_partition, pair);
    out.metaconflict = metaconflict(final_partition, pair);
    return out;
}

// ---- documents -------------------------------------------------------------

namespace {

ordered_json track_json(const Track& t, std::optional<double> conflict) {
    ordered_json obj;
    obj["id"] = t.id;
    obj["class"] = t.resolved_class;
    if (conflict) obj["conflict"] = *conflict;
    obj["report_ids"] = t.report_ids;
    ordered_json rs = ordered_json::array();
    for (const auto& r : t.reports) rs.push_back(ordered_json::parse(serialize_report(r)));
    obj["reports"] = std::move(rs);
    return obj;
}

Track track_from_json(const json& j, const ClassificationTree& tree) {
    std::ostringstream lines;
    for (const auto& r : j.at("reports")) lines << r.dump() << '\n';
    std::istringstream in(lines.str());
    std::vector<Report> reports = parse_report_log(in, tree);
    auto ids = j.at("report_ids").get<std::vector<std::size_t>>();
    if (ids.size() != reports.size()) throw DataError("track: report_ids and reports differ in length");
    Track t = make_track(j.at("id").get<TrackId>(), std::move(reports), std::move(ids), tree);
    if (j.contains("class") && j["class"].get<std::string>() != t.resolved_class) {
        throw DataError("track " + std::to_string(t.id) + ": class does not match its reports");
    }
    return t;
}

std::vector<Track> tracks_from_json(const json& arr, const ClassificationTree& tree) {
    std::vector<Track> out;
    std::set<TrackId> ids;
    for (const auto& t : arr) {
        out.push_back(track_from_json(t, tree));
        if (!ids.insert(out.back().id).second) throw DataError("duplicate track id " + std::to_string(out.back().id));
    }
    return out;
}

json parse_document(std::istream& in, const char* what) {
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

std::string tracks_to_json(const AggregateResult& result) {
    ordered_json doc;
    doc["k"] = result.k;
    doc["weight_by_k"] = result.weight_by_k;
    doc["metaconflict"] = result.metaconflict;
    doc["warnings"] = result.warnings;
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < result.tracks.size(); ++i) {
        std::optional<double> c;
        if (i < result.track_conflicts.size()) c = result.track_conflicts[i];
        arr.push_back(track_json(result.tracks[i], c));
    }
    doc["tracks"] = std::move(arr);
    return doc.dump(2);
}

std::vector<Track> load_tracks(std::istream& in, const ClassificationTree& tree) {
    json doc = parse_document(in, "tracks");
    try {
        if (!doc.contains("tracks")) throw DataError("tracks: missing 'tracks' array");
        return tracks_from_json(doc["tracks"], tree);
    } catch (const json::exception& e) {
        throw DataError(std::string("tracks: ") + e.what());
    }
}

std::string trace_to_csv(std::span<const TraceRow> trace) {
    std::ostringstream out;
    out.precision(17);
    out << "sweep,step,temperature,saturation\n";
    for (const auto& r : trace) out << r.sweep << ',' << r.step << ',' << r.temperature << ',' << r.saturation << '\n';
    return out.str();
}

std::string picture_to_json(const SituationPicture& picture) {
    ordered_json doc;
    ordered_json units = ordered_json::array();
    for (const auto& u : picture.units) {
        ordered_json types = ordered_json::array();
        for (const auto& t : u.types) {
            types.push_back({{"unit_type", t.unit_type},
                             {"classification_conflict", t.classification_conflict},
                             {"support", t.support},
                             {"conflict", t.conflict}});
        }
        units.push_back({{"members", u.members},
                         {"types", types},
                         {"formation_conflict", u.formation_conflict},
                         {"conflict", u.conflict}});
    }
    doc["units"] = std::move(units);
    doc["unaggregated"] = picture.unaggregated;
    ordered_json tracks = ordered_json::array();
    for (const auto& t : picture.tracks) tracks.push_back(track_json(t, std::nullopt));
    doc["tracks"] = std::move(tracks);
    return doc.dump(2);
}

SituationPicture load_picture(std::istream& in, const ClassificationTree& tree) {
    json doc = parse_document(in, "picture");
    SituationPicture p;
    try {
        p.tracks = tracks_from_json(doc.at("tracks"), tree);
        p.unaggregated = doc.at("unaggregated").get<std::vector<TrackId>>();
        for (const auto& u : doc.at("units")) {
            Unit unit;
            unit.members = u.at("members").get<std::vector<TrackId>>();
            unit.formation_conflict = u.at("formation_conflict").get<double>();
            unit.conflict = u.at("conflict").get<double>();
            for (const auto& t : u.at("types")) {
                unit.types.push_back({t.at("unit_type").get<std::string>(),
                                      t.at("classification_conflict").get<double>(), t.at("support").get<double>(),
                                      t.at("conflict").get<double>()});
            }
            p.units.push_back(std::move(unit));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("picture: ") + e.what());
    }
    if (!is_complete_partition(p)) throw DataError("picture: units and unaggregated do not partition the tracks");
    return p;
}

std::string decision_log_to_json(const ClassifyResult& result) {
    auto hypothesis = [](const Hypothesis& h) {
        ordered_json d = ordered_json::array();
        for (const auto& x : h.disjuncts) d.push_back({{"unit_type", x.unit_type}, {"conflict", x.conflict}});
        return ordered_json{{"members", h.members},
                            {"disjuncts", d},
                            {"formation_conflict", h.formation_conflict},
                            {"conflict", h.conflict}};
    };
    ordered_json doc;
    doc["candidates"] = result.generation.candidates;
    doc["subproblems"] = result.subproblems;
    doc["explored"] = result.explored;
    ordered_json generated = ordered_json::array();
    for (const auto& h : result.generation.hypotheses) generated.push_back(hypothesis(h));
    doc["hypotheses"] = std::move(generated);
    ordered_json pruned = ordered_json::array();
    for (const auto& p : result.generation.pruned) pruned.push_back({{"members", p.members}, {"reason", p.reason}});
    doc["pruned"] = std::move(pruned);
    ordered_json demoted = ordered_json::array();
    for (const auto& h : result.demoted) demoted.push_back(hypothesis(h));
    doc["demoted"] = std::move(demoted);
    return doc.dump(2);
}

}  // namespace forceagg
