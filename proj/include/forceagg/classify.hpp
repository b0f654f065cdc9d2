#pragma once
// Template-driven aggregation of tracks into units.
//
// Hypotheses ("these tracks form a unit of type A or B") are grown one track
// at a time, scored by classification conflict against each template and by
// formation conflict, split into independent sub-problems, and each
// sub-problem is solved for the complete, pairwise-consistent hypothesis set
// of least combined conflict.

#include "forceagg/conflict.hpp"
#include "forceagg/domain.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forceagg {

struct ClassificationFit {
    double conflict = 0.0;  // 1 - matched/expected
    double support = 0.0;   // definitely matched / expected
};

// Greedy slot matching, most specific member first. nullopt when a member
// fits no free slot (including overfull groups).
std::optional<ClassificationFit> classification_conflict(std::span<const ClassId> members,
                                                         const UnitTemplate& unit, const ClassificationTree& tree);

// Mean of the pairwise conflicts among `members` (indices into `conflicts`).
double formation_conflict(std::span<const std::size_t> members, const Eigen::MatrixXd& conflicts);

double hypothesis_conflict(double c0, double c1);

struct Disjunct {
    std::string unit_type;
    double classification_conflict = 0.0;
    double support = 0.0;
    double conflict = 0.0;
};

struct Hypothesis {
    std::vector<TrackId> members;     // sorted ascending
    std::vector<Disjunct> disjuncts;  // sorted by conflict, then unit type
    double formation_conflict = 0.0;
    double conflict = 0.0;
    bool fallback = false;  // "left unaggregated" singleton
};

// Minimum over disjuncts of hypothesis_conflict(c0, formation conflict).
double evaluate_disjunction(const Hypothesis& h);

bool conflicts_with(const Hypothesis& a, const Hypothesis& b);

// Elements to aggregate: ids, classes and the pairwise conflict matrix, all
// indexed by position.
struct ElementSet {
    std::vector<TrackId> ids;
    std::vector<ClassId> classes;
    Eigen::MatrixXd conflicts;

    std::size_t size() const { return ids.size(); }
};

ElementSet elements_from_tracks(std::span<const Track> tracks, const ConflictConfig& config);

struct ClassifyConfig {
    double keep_threshold = 0.5;
    double present_delta = 0.05;
    double fallback_conflict = 0.5;
    int per_track_cap = 0;  // m best hypotheses per track and size; 0 = unlimited
    int level = 1;          // only templates of this level are used
};

void validate(const ClassifyConfig& cfg);

struct PrunedHypothesis {
    std::vector<TrackId> members;
    std::string reason;
};

struct GenerationResult {
    std::vector<Hypothesis> hypotheses;
    std::vector<PrunedHypothesis> pruned;
    std::size_t candidates = 0;  // distinct member sets evaluated
};

GenerationResult generate_hypotheses(const ElementSet& elements, std::span<const UnitTemplate> templates,
                                     const ClassificationTree& tree, const ClassifyConfig& config);

struct SubProblem {
    std::vector<Hypothesis> hypotheses;
    std::vector<TrackId> tracks;  // sorted
};

// Connected components of the conflicts_with relation.
std::vector<SubProblem> partition_problem_space(std::span<const Hypothesis> hypotheses);

struct HypothesisSet {
    std::vector<Hypothesis> hypotheses;
    double conflict = 0.0;
    std::size_t explored = 0;  // search nodes visited
};

// 1 - prod(1 - C(H)), multiplied in ascending order of C(H).
double set_conflict(std::span<const Hypothesis> hypotheses);

// Strict ordering used to break ties between equally conflicting sets:
// fewer hypotheses first, then lexicographic on the sorted member lists.
bool tie_break_less(std::span<const Hypothesis> a, std::span<const Hypothesis> b);

// Branch-and-bound depth-first search for the complete consistent set of
// least conflict, with ties broken by tie_break_less.
// Throws DataError if no complete set exists.
HypothesisSet best_consistent_set(const SubProblem& problem);

struct ClassifyResult {
    std::vector<Unit> units;
    std::vector<TrackId> unaggregated;
    // diagnostics
    GenerationResult generation;
    std::size_t subproblems = 0;
    std::size_t explored = 0;
    std::vector<Hypothesis> demoted;  // chosen but above keep_threshold
};

ClassifyResult classify_elements(const ElementSet& elements, std::span<const UnitTemplate> templates,
                                 const ClassificationTree& tree, const ClassifyConfig& config);

SituationPicture classify_units(std::span<const Track> tracks, std::span<const UnitTemplate> templates,
                                const ClassificationTree& tree, const ConflictConfig& conflicts,
                                const ClassifyConfig& config, ClassifyResult* diagnostics = nullptr);

// ---- next level (experimental) --------------------------------------------

struct HigherElement {
    TrackId id = 0;
    ClassId class_id;              // unit type, or vehicle class for a lone track
    std::vector<TrackId> tracks;   // member vehicle tracks
};

struct HigherLevelPicture {
    std::vector<HigherElement> elements;
    std::vector<Unit> units;  // members are HigherElement ids
    std::vector<TrackId> unaggregated;
};

// Track through the centroid of the member tracks at each of their report
// times covered by at least one member.
Track centroid_track(TrackId id, std::span<const Track* const> members);

// Treats each unit and each unaggregated track of `picture` as one element and
// aggregates them with the templates of `config.level` (normally 2). Unit
// types join the classification tree as children of the root.
HigherLevelPicture aggregate_next_level(const SituationPicture& picture, std::span<const UnitTemplate> templates,
                                        const ClassificationTree& tree, const ConflictConfig& conflicts,
                                        const ClassifyConfig& config);

}  // namespace forceagg
