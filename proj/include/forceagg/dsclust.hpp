#pragma once
// Dempster-Shafer clustering with a Potts-spin mean-field annealer.
//
// Pairwise conflicts c_ij become interaction weights J_ij = -ln(1 - c_ij).
// Minimising the Potts energy sum_a sum_{i<j} J_ij S_ia S_ja over hard
// assignments is the same as minimising the metaconflict 1 - prod(1 - c_a)
// when each cluster's conflict is the product form over its member pairs.

#include "forceagg/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace forceagg {

inline constexpr double kWeightCap = 12.0;

// -ln(1 - c), capped at kWeightCap.
double weight_of_conflict(double c);

using PairConflict = std::function<double(std::size_t, std::size_t)>;

// Symmetric, zero diagonal, entries in [0, kWeightCap].
class InteractionMatrix {
public:
    explicit InteractionMatrix(Eigen::MatrixXd weights);

    std::size_t size() const { return static_cast<std::size_t>(weights_.rows()); }
    double operator()(std::size_t i, std::size_t j) const { return weights_(i, j); }
    const Eigen::MatrixXd& weights() const { return weights_; }

private:
    Eigen::MatrixXd weights_;
};

// Throws DataError if the conflict function leaves [0, 1] or n == 0.
InteractionMatrix build_interactions(std::size_t n, const PairConflict& conflict);

struct AnnealConfig {
    double gamma = 0.5;
    // alpha per cluster count; counts above the largest key use alpha_beyond
    std::map<int, double> alpha_by_k{{8, 1e-6}, {9, 0.0}, {10, 3e-7}, {11, 3e-8}};
    double alpha_beyond = 3e-8;
    double epsilon = 0.001;
    double tau = 0.9;
    double inner_tol = 0.01;
    double freeze_tol = 0.99;
    double row_max_tol = 0.9;
    std::uint64_t seed = 1;
    int max_sweeps = 20000;
    // sweeps at one temperature before cooling anyway; 0 = until fixed point
    int max_inner = 0;
    // weight of the new softmax output in each synchronous update; 1 = none
    double step = 0.5;
    // cluster_fixed_k: independent annealing runs, each followed by refinement
    int restarts = 8;

    double alpha_for(int k) const;
};

void validate(const AnnealConfig& cfg);

struct Partition {
    std::vector<int> assignment;  // element -> cluster in [0, k)
    int k = 1;
};

// Non-empty clusters as element index lists, ordered by first member.
std::vector<std::vector<std::size_t>> clusters_of(const Partition& p);

struct SpinState {
    Eigen::MatrixXd V;  // n x K
    double temperature = 0.0;
    int sweep = 0;
};

struct TraceRow {
    int sweep = 0;
    int step = 0;  // temperature step
    double temperature = 0.0;
    double saturation = 0.0;  // (1/N) sum V^2
};

struct AnnealResult {
    Partition partition;
    SpinState state;
    std::vector<TraceRow> trace;
    std::vector<double> step_energy;  // Potts energy of the hard assignment after each temperature
    double critical_temperature = 0.0;
};

class AnnealNotFrozen : public ConvergenceError {
public:
    AnnealNotFrozen(const std::string& what, SpinState state)
        : ConvergenceError(what), state_(std::move(state)) {}
    const SpinState& state() const { return state_; }

private:
    SpinState state_;
};

// (1/K) max(-lambda_min, lambda_max) of M = J + alpha - gamma*I; falls back
// to 1/K when that is not positive.
double critical_temperature(const InteractionMatrix& J, int k, double alpha, double gamma);

// Mean-field annealing at fixed K. `keys` (optional, one per element) picks
// each element's noise stream; by default the element index is used.
// Throws AnnealNotFrozen when max_sweeps is exhausted.
AnnealResult anneal(const InteractionMatrix& J, int k, const AnnealConfig& cfg,
                    std::span<const std::uint64_t> keys = {});

// Zero-temperature polish of a hard assignment: moves single elements to the
// cluster with the lowest summed interaction until no move lowers the pair
// cost. Returns the number of moves made.
int refine_partition(Partition& p, const InteractionMatrix& J);

// Best of `cfg.restarts` seeded anneal + refine runs, ranked by Potts energy.
// Runs that do not freeze are skipped; throws AnnealNotFrozen only if all fail.
AnnealResult cluster_fixed_k(const InteractionMatrix& J, int k, const AnnealConfig& cfg);

// Within-cluster conflict c_a = 1 - prod over member pairs (1 - conf).
std::vector<double> cluster_conflicts(const Partition& p, const PairConflict& conflict);
double metaconflict(const Partition& p, const PairConflict& conflict);
double total_weight_of_conflict(const Partition& p, const PairConflict& conflict);

// Energy with the gamma and alpha terms, on a hard assignment.
double potts_energy(const Partition& p, const InteractionMatrix& J, double alpha, double gamma);

struct ClusterCountResult {
    int k = 1;
    Partition partition;
    std::vector<double> weight_by_k;  // index k-1
    AnnealResult anneal;
};

// Runs cluster_fixed_k for K = 1, 2, ... and returns the first K whose total weight of
// conflict drops below `threshold`, else the K with the smallest value.
ClusterCountResult select_cluster_count(const InteractionMatrix& J, const PairConflict& conflict, int k_max,
                                        double threshold, const AnnealConfig& cfg);

}  // namespace forceagg
