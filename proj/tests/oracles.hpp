#pragma once
// Exhaustive reference solvers, independent of the production search code.

#include "forceagg/classify.hpp"
#include "forceagg/dsclust.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

// Minimal metaconflict over every partition of n elements into at most k
// blocks (restricted growth strings). Cluster conflict is recomputed here in
// the pairwise product form.
inline double min_metaconflict(std::size_t n, int k, const std::function<double(std::size_t, std::size_t)>& conf) {
    std::vector<int> label(n, 0);
    double best = 2.0;
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
        if (i == n) {
            double keep = 1.0;
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = a + 1; b < n; ++b) {
                    if (label[a] == label[b]) keep *= 1.0 - conf(a, b);
                }
            }
            best = std::min(best, 1.0 - keep);
            return;
        }
        for (int c = 0; c < std::min(used + 1, k); ++c) {
            label[i] = c;
            rec(i + 1, std::max(used, c + 1));
        }
    };
    rec(0, 0);
    return best;
}

struct SetOptimum {
    std::vector<std::size_t> chosen;  // indices into the input
    double conflict = 0.0;
};

// Every subset of `hs` that is pairwise disjoint and covers `tracks`; the one
// with least 1 - prod(1 - C), ties by fewer members then lexicographic sorted
// member lists. nullopt if no complete set exists.
inline std::optional<SetOptimum> best_complete_set(const std::vector<forceagg::Hypothesis>& hs,
                                                   const std::vector<forceagg::TrackId>& tracks) {
    const std::size_t n = hs.size();
    std::optional<SetOptimum> best;
    std::vector<std::vector<forceagg::TrackId>> best_lists;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::multiset<forceagg::TrackId> covered;
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1) {
                chosen.push_back(i);
                covered.insert(hs[i].members.begin(), hs[i].members.end());
            }
        }
        std::set<forceagg::TrackId> distinct(covered.begin(), covered.end());
        if (distinct.size() != covered.size()) continue;
        if (std::vector<forceagg::TrackId>(distinct.begin(), distinct.end()) != tracks) continue;
        std::vector<double> cs;
        for (auto i : chosen) cs.push_back(hs[i].conflict);
        std::sort(cs.begin(), cs.end());
        double keep = 1.0;
        for (double c : cs) keep *= 1.0 - c;
        double value = 1.0 - keep;
        std::vector<std::vector<forceagg::TrackId>> lists;
        for (auto i : chosen) lists.push_back(hs[i].members);
        std::sort(lists.begin(), lists.end());
        bool better = !best || value < best->conflict ||
                      (value == best->conflict &&
                       (chosen.size() < best->chosen.size() ||
                        (chosen.size() == best->chosen.size() && lists < best_lists)));
        if (better) {
            best = SetOptimum{chosen, value};
            best_lists = lists;
        }
    }
    return best;
}

}  // namespace oracle
