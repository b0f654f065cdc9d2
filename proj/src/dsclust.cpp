#include "forceagg/dsclust.hpp"

#include "forceagg/counter_rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace forceagg {

namespace {

constexpr double kMinClusterMass = 1e-12;

void check_conflict(double c, std::size_t i, std::size_t j) {
    if (!(c >= 0.0 && c <= 1.0)) {
        throw DataError("conflict between " + std::to_string(i) + " and " + std::to_string(j) +
                        " outside [0, 1]: " + std::to_string(c));
    }
}

Partition hard_assignment(const Eigen::MatrixXd& V) {
    Partition p;
    p.k = static_cast<int>(V.cols());
    p.assignment.resize(static_cast<std::size_t>(V.rows()));
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
        Eigen::Index best = 0;
        V.row(i).maxCoeff(&best);
        p.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return p;
}

// Row-wise softmax of -H/T.
void softmax_rows(const Eigen::MatrixXd& H, double T, Eigen::MatrixXd& out) {
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        double lo = H.row(i).minCoeff();
        double z = 0.0;
        for (Eigen::Index a = 0; a < H.cols(); ++a) {
            out(i, a) = std::exp(-(H(i, a) - lo) / T);
            z += out(i, a);
        }
        out.row(i) /= z;
    }
}

}  // namespace

double weight_of_conflict(double c) {
    if (c >= 1.0) return kWeightCap;
    return std::min(-std::log1p(-c), kWeightCap);
}

InteractionMatrix::InteractionMatrix(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
    if (weights_.rows() != weights_.cols()) throw DataError("interaction matrix must be square");
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
        if (weights_(i, i) != 0.0) throw DataError("interaction matrix must have a zero diagonal");
        for (Eigen::Index j = 0; j < i; ++j) {
            double w = weights_(i, j);
            if (w != weights_(j, i)) throw DataError("interaction matrix must be symmetric");
            if (!(w >= 0.0 && w <= kWeightCap)) throw DataError("interaction weight out of range");
        }
    }
}

InteractionMatrix build_interactions(std::size_t n, const PairConflict& conflict) {
    if (n == 0) throw DataError("build_interactions: no elements");
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double c = conflict(i, j);
            check_conflict(c, i, j);
            double w = weight_of_conflict(c);
            W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
            W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
        }
    }
    return InteractionMatrix(std::move(W));
}

double AnnealConfig::alpha_for(int k) const {
    auto it = alpha_by_k.find(k);
    if (it != alpha_by_k.end()) return it->second;
    if (!alpha_by_k.empty() && k > alpha_by_k.rbegin()->first) return alpha_beyond;
    return 0.0;
}

void validate(const AnnealConfig& cfg) {
    if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw DataError("anneal: tau must lie in (0, 1)");
    if (!(cfg.epsilon > 0.0)) throw DataError("anneal: epsilon must be positive");
    if (!(cfg.freeze_tol > 0.0 && cfg.freeze_tol < 1.0)) throw DataError("anneal: freeze_tol must lie in (0, 1)");
    if (!(cfg.inner_tol > 0.0)) throw DataError("anneal: inner_tol must be positive");
    if (cfg.max_sweeps < 1) throw DataError("anneal: max_sweeps must be >= 1");
    if (!(cfg.step > 0.0 && cfg.step <= 1.0)) throw DataError("anneal: step must lie in (0, 1]");
    if (cfg.max_inner < 0) throw DataError("anneal: max_inner must be >= 0");
    if (cfg.restarts < 1) throw DataError("anneal: restarts must be >= 1");
}

std::vector<std::vector<std::size_t>> clusters_of(const Partition& p) {
    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(std::max(p.k, 0)));
    std::vector<int> first_seen;
    for (std::size_t i = 0; i < p.assignment.size(); ++i) {
        int a = p.assignment[i];
        if (a < 0 || a >= p.k) throw DataError("partition label out of range");
        if (by_label[static_cast<std::size_t>(a)].empty()) first_seen.push_back(a);
        by_label[static_cast<std::size_t>(a)].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(first_seen.size());
    for (int a : first_seen) out.push_back(std::move(by_label[static_cast<std::size_t>(a)]));
    return out;
}

double critical_temperature(const InteractionMatrix& J, int k, double alpha, double gamma) {
    if (k < 1) throw DataError("critical_temperature: K must be >= 1");
    const auto n = static_cast<Eigen::Index>(J.size());
    if (n == 0) throw DataError("critical_temperature: empty matrix");
    Eigen::MatrixXd M = J.weights().array() + alpha;
    M.diagonal().array() -= gamma;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw ConvergenceError("critical_temperature: eigensolver failed");
    double lmin = solver.eigenvalues().minCoeff();
    double lmax = solver.eigenvalues().maxCoeff();
    double tc = std::max(-lmin, lmax) / k;
    return tc > 0.0 ? tc : 1.0 / k;
}

AnnealResult anneal(const InteractionMatrix& J, int k, const AnnealConfig& cfg,
                    std::span<const std::uint64_t> keys) {
    validate(cfg);
    const auto n = static_cast<Eigen::Index>(J.size());
    if (k < 1) throw DataError("anneal: K must be >= 1");
    if (n < 1) throw DataError("anneal: no elements");
    if (!keys.empty() && keys.size() != J.size()) throw DataError("anneal: one noise key per element required");

    const double alpha = cfg.alpha_for(k);
    auto key = [&](Eigen::Index i) { return keys.empty() ? static_cast<std::uint64_t>(i) : keys[static_cast<std::size_t>(i)]; };
    // Adds eps*U[0,1) to every entry and renormalises each row.
    auto add_noise = [&](Eigen::MatrixXd& V, int sweep) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index a = 0; a < k; ++a) {
                V(i, a) += cfg.epsilon * counter_uniform(cfg.seed, key(i), static_cast<std::uint64_t>(sweep),
                                                         static_cast<std::uint64_t>(a));
            }
            V.row(i) /= V.row(i).sum();
        }
    };

    AnnealResult result;
    result.critical_temperature = critical_temperature(J, k, alpha, cfg.gamma);
    double T = result.critical_temperature;

    Eigen::MatrixXd coupling = J.weights().array() + alpha;
    // `clean` is the softmax output (rows sum to 1 exactly); `state` is the
    // noise-perturbed copy that drives the next sweep.
    Eigen::MatrixXd clean = Eigen::MatrixXd::Constant(n, k, 1.0 / k);
    Eigen::MatrixXd state = clean;
    add_noise(state, 0);
    Eigen::MatrixXd next(n, k);
    Eigen::MatrixXd H(n, k);
    Eigen::VectorXd G(k);

    const double inv_n = 1.0 / static_cast<double>(n);
    int sweep = 0;
    for (int step = 0;; ++step) {
        double saturation = 0.0;
        for (int inner = 1;; ++inner) {
            G = (static_cast<double>(k) * inv_n) * state.colwise().sum().transpose();
            G = G.cwiseMax(kMinClusterMass);
            H.noalias() = coupling * state;
            H -= cfg.gamma * state;
            H.array().rowwise() /= G.transpose().array();
            softmax_rows(H, T, next);
            if (cfg.step < 1.0) next = cfg.step * next + (1.0 - cfg.step) * clean;

            double change = (next - clean).cwiseAbs().sum() * inv_n;
            clean = next;
            state = next;
            ++sweep;
            add_noise(state, sweep);
            saturation = clean.squaredNorm() * inv_n;
            result.trace.push_back({sweep, step, T, saturation});

            if (change <= cfg.inner_tol) break;
            if (cfg.max_inner > 0 && inner >= cfg.max_inner) break;
            if (sweep >= cfg.max_sweeps) {
                throw AnnealNotFrozen("anneal: no convergence within " + std::to_string(cfg.max_sweeps) + " sweeps",
                                      SpinState{clean, T, sweep});
            }
        }
        result.step_energy.push_back(potts_energy(hard_assignment(clean), J, alpha, cfg.gamma));
        T *= cfg.tau;

        double weakest_row = clean.rowwise().maxCoeff().minCoeff();
        if (saturation >= cfg.freeze_tol && weakest_row >= cfg.row_max_tol) break;
        if (sweep >= cfg.max_sweeps) {
            throw AnnealNotFrozen("anneal: spins not frozen within " + std::to_string(cfg.max_sweeps) + " sweeps",
                                  SpinState{clean, T, sweep});
        }
    }

    result.partition = hard_assignment(clean);
    result.state = SpinState{std::move(clean), T, sweep};
    return result;
}

int refine_partition(Partition& p, const InteractionMatrix& J) {
    const std::size_t n = p.assignment.size();
    if (n != J.size()) throw DataError("refine_partition: size mismatch");
    std::vector<double> cost(static_cast<std::size_t>(p.k));
    int moves = 0;
    for (bool moved = true; moved;) {
        moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(cost.begin(), cost.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) cost[static_cast<std::size_t>(p.assignment[j])] += J(i, j);
            }
            int current = p.assignment[i];
            int best = current;
            for (int a = 0; a < p.k; ++a) {
                if (cost[static_cast<std::size_t>(a)] < cost[static_cast<std::size_t>(best)] - 1e-12) best = a;
            }
            if (best != current) {
                p.assignment[i] = best;
                moved = true;
                ++moves;
            }
        }
    }
    return moves;
}

AnnealResult cluster_fixed_k(const InteractionMatrix& J, int k, const AnnealConfig& cfg) {
    validate(cfg);
    AnnealResult best;
    double best_energy = std::numeric_limits<double>::infinity();
    const double alpha = cfg.alpha_for(k);
    std::optional<AnnealNotFrozen> failure;
    int completed = 0;
    for (int r = 0; r < cfg.restarts; ++r) {
        AnnealConfig run = cfg;
        run.seed = r == 0 ? cfg.seed : counter_hash(cfg.seed, 0x52, static_cast<std::uint64_t>(r), 0);
        AnnealResult res;
        try {
            res = anneal(J, k, run);
        } catch (const AnnealNotFrozen& e) {
            // an oscillating run is dropped; the others may still freeze
            failure = e;
            continue;
        }
        ++completed;
        refine_partition(res.partition, J);
        double e = potts_energy(res.partition, J, alpha, cfg.gamma);
        if (e < best_energy) {
            best_energy = e;
            best = std::move(res);
        }
    }
    if (completed == 0) throw *failure;
    return best;
}

std::vector<double> cluster_conflicts(const Partition& p, const PairConflict& conflict) {
    std::vector<double> out;
    for (const auto& members : clusters_of(p)) {
        double keep = 1.0;
        for (std::size_t x = 0; x < members.size(); ++x) {
            for (std::size_t y = x + 1; y < members.size(); ++y) {
                double c = conflict(members[x], members[y]);
                check_conflict(c, members[x], members[y]);
                keep *= 1.0 - c;
            }
        }
        out.push_back(1.0 - keep);
    }
    return out;
}

double metaconflict(const Partition& p, const PairConflict& conflict) {
    double keep = 1.0;
    for (double c : cluster_conflicts(p, conflict)) keep *= 1.0 - c;
    return 1.0 - keep;
}

double total_weight_of_conflict(const Partition& p, const PairConflict& conflict) {
    double total = 0.0;
    for (double c : cluster_conflicts(p, conflict)) total += weight_of_conflict(c);
    return total;
}

double potts_energy(const Partition& p, const InteractionMatrix& J, double alpha, double gamma) {
    double pair_cost = 0.0;
    std::vector<double> sizes(static_cast<std::size_t>(p.k), 0.0);
    for (std::size_t i = 0; i < p.assignment.size(); ++i) {
        sizes[static_cast<std::size_t>(p.assignment[i])] += 1.0;
        for (std::size_t j = i + 1; j < p.assignment.size(); ++j) {
            if (p.assignment[i] == p.assignment[j]) pair_cost += J(i, j);
        }
    }
    double balance = 0.0;
    for (double s : sizes) balance += s * s;
    return pair_cost - 0.5 * gamma * static_cast<double>(p.assignment.size()) + 0.5 * alpha * balance;
}

ClusterCountResult select_cluster_count(const InteractionMatrix& J, const PairConflict& conflict, int k_max,
                                        double threshold, const AnnealConfig& cfg) {
    if (k_max < 1) throw DataError("select_cluster_count: k_max must be >= 1");
    if (!(threshold > 0.0)) throw DataError("select_cluster_count: threshold must be positive");
    const int upper = std::min(k_max, static_cast<int>(J.size()));

    ClusterCountResult best;
    double best_weight = std::numeric_limits<double>::infinity();
    std::vector<double> weights;
    for (int k = 1; k <= upper; ++k) {
        AnnealConfig run = cfg;
        run.seed = counter_hash(cfg.seed, 0x4b, static_cast<std::uint64_t>(k), 0);
        AnnealResult r = cluster_fixed_k(J, k, run);
        double w = total_weight_of_conflict(r.partition, conflict);
        weights.push_back(w);
        if (w < best_weight) {
            best_weight = w;
            best.k = k;
            best.partition = r.partition;
            best.anneal = std::move(r);
        }
        if (w < threshold) break;
    }
    best.weight_by_k = std::move(weights);
    return best;
}

}  // namespace forceagg
