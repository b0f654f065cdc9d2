#pragma once
// Batch pipeline stages shared by the command-line tool and the tests:
// reports -> tracks -> situation picture, plus the JSON formats between them.

#include "forceagg/classify.hpp"
#include "forceagg/conflict.hpp"
#include "forceagg/domain.hpp"
#include "forceagg/dsclust.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace forceagg {

struct PipelineConfig {
    ConflictConfig conflicts;
    AnnealConfig anneal;
    int k_max = 20;
    double cluster_threshold = 0.105;
    ClassifyConfig classify;
    std::uint64_t seed = 1;  // replaces anneal.seed
};

void validate(const PipelineConfig& cfg);

// Keys missing from the document keep their defaults; unknown keys are an
// error.
PipelineConfig load_config(std::istream& in);
std::string config_to_json(const PipelineConfig& cfg);

struct AggregateResult {
    std::vector<Track> tracks;
    std::vector<double> track_conflicts;  // remaining within-track conflict, per track
    double metaconflict = 0.0;
    int k = 0;                        // cluster count chosen before repair
    std::vector<double> weight_by_k;  // index k-1
    std::vector<TraceRow> trace;      // annealing trace at the chosen k
    std::vector<std::string> warnings;
};

// Clusters reports into tracks. Clusters holding class-inconsistent reports
// are split by their most specific classes; reports that fit several parts
// join the one they conflict with least.
AggregateResult aggregate_reports(std::span<const Report> reports, const ClassificationTree& tree,
                                  const PipelineConfig& cfg);

std::string tracks_to_json(const AggregateResult& result);
// Reads the tracks document (reports are embedded).
std::vector<Track> load_tracks(std::istream& in, const ClassificationTree& tree);

std::string trace_to_csv(std::span<const TraceRow> trace);

std::string picture_to_json(const SituationPicture& picture);
SituationPicture load_picture(std::istream& in, const ClassificationTree& tree);

// Generated, pruned and chosen hypotheses of one classification run.
std::string decision_log_to_json(const ClassifyResult& result);

}  // namespace forceagg
