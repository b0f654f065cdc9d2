// forceagg: simulate -> aggregate -> classify -> score.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 annealing did not converge.

#include "forceagg/classify.hpp"
#include "forceagg/error.hpp"
#include "forceagg/pipeline.hpp"
#include "forceagg/scengen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace forceagg;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return in;
}

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

std::string with_newline(std::string s) {
    if (s.empty() || s.back() != '\n') s.push_back('\n');
    return s;
}

struct Common {
    std::string config_path;
    std::string tree_path;
    std::string templates_path;
    std::optional<std::uint64_t> seed;

    ClassificationTree tree() const {
        if (tree_path.empty()) return ClassificationTree::default_tree();
        auto in = open_in(tree_path);
        return load_tree(in);
    }

    std::vector<UnitTemplate> templates() const {
        if (templates_path.empty()) return default_templates();
        auto in = open_in(templates_path);
        return load_templates(in);
    }

    PipelineConfig config() const {
        PipelineConfig cfg;
        if (!config_path.empty()) {
            auto in = open_in(config_path);
            cfg = load_config(in);
        }
        if (seed) cfg.seed = *seed;
        return cfg;
    }
};

std::vector<Report> read_log(const std::string& path, const ClassificationTree& tree) {
    auto in = open_in(path);
    try {
        return parse_report_log(in, tree);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conflict-based force aggregation"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "Pipeline config (JSON)");
    app.add_option("--tree", common.tree_path, "Classification tree (JSON)");
    app.add_option("--templates", common.templates_path, "Unit templates (JSON)");
    app.add_option("--seed", common.seed, "Seed override");

    std::string out_path;
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "Generate a report log from a scenario spec");
    std::string spec_path;
    std::string truth_path;
    simulate->add_option("spec", spec_path, "Scenario spec (JSON)")->required();
    simulate->add_option("-o,--out", out_path, "Report log (default stdout)");
    simulate->add_option("--truth", truth_path, "Write ground truth (JSON) here");

    auto* aggregate = app.add_subcommand("aggregate", "Cluster reports into vehicle tracks");
    std::string log_path;
    std::optional<int> k_max;
    std::optional<double> threshold;
    std::string trace_path;
    aggregate->add_option("log", log_path, "Report log (JSONL or CSV)")->required();
    aggregate->add_option("-o,--out", out_path, "Tracks (default stdout)");
    aggregate->add_option("--k-max", k_max, "Largest cluster count tried");
    aggregate->add_option("--threshold", threshold, "Total weight of conflict accepted");
    aggregate->add_option("--trace", trace_path, "Write the annealing trace (CSV) here");

    auto* classify = app.add_subcommand("classify", "Aggregate tracks into units");
    std::string tracks_path;
    std::string decision_path;
    classify->add_option("tracks", tracks_path, "Tracks (JSON)")->required();
    classify->add_option("-o,--out", out_path, "Situation picture (default stdout)");
    classify->add_option("--decision-log", decision_path, "Write hypotheses and choices (JSON) here");

    auto* score_cmd = app.add_subcommand("score", "Score a picture against the names in a report log");
    std::string picture_path;
    std::string scored_log;
    score_cmd->add_option("picture", picture_path, "Situation picture (JSON)")->required();
    score_cmd->add_option("log", scored_log, "Report log with names")->required();

    auto* config_cmd = app.add_subcommand("config", "Show the effective configuration");
    bool dump = false;
    config_cmd->add_flag("--dump", dump, "Print the configuration as JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate) {
            auto in = open_in(spec_path);
            ScenarioSpec spec = load_scenario(in);
            if (common.seed) spec.seed = *common.seed;
            auto tree = common.tree();
            auto templates = common.templates();
            Scenario sc = generate_scenario(spec, templates, tree);
            std::ostringstream log;
            write_report_log(log, sc.reports);
            write_out(out_path, log.str());
            if (!truth_path.empty()) {
                nlohmann::ordered_json doc;
                doc["vehicles"] = nlohmann::ordered_json::array();
                for (const auto& v : sc.truth.vehicles) doc["vehicles"].push_back({{"name", v.name}, {"class", v.class_id}});
                doc["units"] = nlohmann::ordered_json::array();
                for (const auto& u : sc.truth.units) {
                    doc["units"].push_back({{"name", u.name}, {"unit_type", u.unit_type}, {"vehicles", u.vehicles}});
                }
                write_out(truth_path, with_newline(doc.dump(2)));
            }
        } else if (*aggregate) {
            PipelineConfig cfg = common.config();
            if (k_max) cfg.k_max = *k_max;
            if (threshold) cfg.cluster_threshold = *threshold;
            auto tree = common.tree();
            auto reports = read_log(log_path, tree);
            AggregateResult r = aggregate_reports(reports, tree, cfg);
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            write_out(out_path, with_newline(tracks_to_json(r)));
            if (!trace_path.empty()) write_out(trace_path, trace_to_csv(r.trace));
        } else if (*classify) {
            PipelineConfig cfg = common.config();
            auto tree = common.tree();
            auto templates = common.templates();
            auto in = open_in(tracks_path);
            auto tracks = load_tracks(in, tree);
            ClassifyResult diag;
            SituationPicture picture = classify_units(tracks, templates, tree, cfg.conflicts, cfg.classify, &diag);
            write_out(out_path, with_newline(picture_to_json(picture)));
            if (!decision_path.empty()) write_out(decision_path, with_newline(decision_log_to_json(diag)));
        } else if (*score_cmd) {
            auto tree = common.tree();
            auto in = open_in(picture_path);
            SituationPicture picture = load_picture(in, tree);
            auto reports = read_log(scored_log, tree);
            GroundTruth truth = truth_from_reports(reports, tree);
            ScoreMetrics m = score(picture, reports, truth);
            nlohmann::ordered_json doc{{"purity", m.purity},
                                       {"pair_precision", m.pair_precision},
                                       {"pair_recall", m.pair_recall},
                                       {"vehicle_count_error", m.vehicle_count_error},
                                       {"unit_precision", m.unit_precision},
                                       {"unit_recall", m.unit_recall}};
            std::cout << doc.dump(2) << '\n';
        } else if (*config_cmd) {
            std::cout << config_to_json(common.config()) << '\n';
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
