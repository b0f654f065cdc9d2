#include "forceagg/classify.hpp"

#include "forceagg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace forceagg {

std::optional<ClassificationFit> classification_conflict(std::span<const ClassId> members,
                                                         const UnitTemplate& unit, const ClassificationTree& tree) {
    std::vector<const ClassId*> slots;
    for (const auto& s : unit.composition) {
        for (int c = 0; c < s.count; ++c) slots.push_back(&s.class_id);
    }
    if (slots.empty()) throw DataError("template '" + unit.unit_type + "' has no slots");
    if (members.size() > slots.size()) return std::nullopt;

    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tree.depth(members[a]) > tree.depth(members[b]);
    });

    std::vector<bool> filled(slots.size(), false);
    std::size_t definite = 0;
    for (auto m : order) {
        const ClassId& cls = members[m];
        // a slot the member certainly is (slot class or a specialisation of it)
        std::optional<std::size_t> pick;
        for (std::size_t s = 0; s < slots.size() && !pick; ++s) {
            if (!filled[s] && tree.is_ancestor_or_self(*slots[s], cls)) pick = s;
        }
        if (pick) {
            ++definite;
        } else {
            // otherwise a slot the member might be (member class is coarser)
            for (std::size_t s = 0; s < slots.size() && !pick; ++s) {
                if (!filled[s] && tree.is_ancestor_or_self(cls, *slots[s])) pick = s;
            }
        }
        if (!pick) return std::nullopt;
        filled[*pick] = true;
    }
    const double expected = static_cast<double>(slots.size());
    return ClassificationFit{1.0 - static_cast<double>(members.size()) / expected,
                             static_cast<double>(definite) / expected};
}

double formation_conflict(std::span<const std::size_t> members, const Eigen::MatrixXd& conflicts) {
    if (members.size() < 2) return 0.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            sum += conflicts(static_cast<Eigen::Index>(members[a]), static_cast<Eigen::Index>(members[b]));
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double hypothesis_conflict(double c0, double c1) {
    return 1.0 - (1.0 - c0) * (1.0 - c1);
}

double evaluate_disjunction(const Hypothesis& h) {
    if (h.disjuncts.empty()) throw DataError("hypothesis without disjuncts");
    double best = 1.0;
    for (const auto& d : h.disjuncts) best = std::min(best, hypothesis_conflict(d.classification_conflict, h.formation_conflict));
    return best;
}

bool conflicts_with(const Hypothesis& a, const Hypothesis& b) {
    auto i = a.members.begin();
    auto j = b.members.begin();
    while (i != a.members.end() && j != b.members.end()) {
        if (*i == *j) return true;
        if (*i < *j) ++i; else ++j;
    }
    return false;
}

ElementSet elements_from_tracks(std::span<const Track> tracks, const ConflictConfig& config) {
    ElementSet out;
    const auto n = static_cast<Eigen::Index>(tracks.size());
    out.conflicts = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : tracks) {
        out.ids.push_back(t.id);
        out.classes.push_back(t.resolved_class);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double c = track_conflict(tracks[static_cast<std::size_t>(i)], tracks[static_cast<std::size_t>(j)], config);
            out.conflicts(i, j) = c;
            out.conflicts(j, i) = c;
        }
    }
    return out;
}

void validate(const ClassifyConfig& cfg) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(cfg.keep_threshold)) throw DataError("classify: keep_threshold must lie in [0, 1]");
    if (!unit(cfg.fallback_conflict)) throw DataError("classify: fallback conflict must lie in [0, 1]");
    if (!(cfg.present_delta >= 0.0)) throw DataError("classify: present_delta must be non-negative");
    if (cfg.per_track_cap < 0) throw DataError("classify: per_track_cap must be >= 0");
}

namespace {

struct Candidate {
    std::vector<std::size_t> positions;  // sorted element positions
    Hypothesis hypothesis;
};

std::vector<TrackId> ids_of(const ElementSet& elements, std::span<const std::size_t> positions) {
    std::vector<TrackId> ids;
    ids.reserve(positions.size());
    for (auto p : positions) ids.push_back(elements.ids[p]);
    std::sort(ids.begin(), ids.end());
    return ids;
}

// Scores a member set against every template; nullopt with a reason when the
// set is not worth keeping.
std::optional<Hypothesis> evaluate(const ElementSet& elements, std::span<const std::size_t> positions,
                                   std::span<const UnitTemplate* const> templates, const ClassificationTree& tree,
                                   const ClassifyConfig& config, std::string& reason) {
    Hypothesis h;
    h.members = ids_of(elements, positions);
    h.formation_conflict = formation_conflict(positions, elements.conflicts);
    if (h.formation_conflict >= config.keep_threshold) {
        reason = "formation";
        return std::nullopt;
    }
    std::vector<ClassId> classes;
    for (auto p : positions) classes.push_back(elements.classes[p]);
    for (const auto* t : templates) {
        auto fit = classification_conflict(classes, *t, tree);
        if (!fit) continue;
        h.disjuncts.push_back({t->unit_type, fit->conflict, fit->support,
                               hypothesis_conflict(fit->conflict, h.formation_conflict)});
    }
    if (h.disjuncts.empty()) {
        reason = "type";
        return std::nullopt;
    }
    std::stable_sort(h.disjuncts.begin(), h.disjuncts.end(), [](const Disjunct& a, const Disjunct& b) {
        if (a.conflict != b.conflict) return a.conflict < b.conflict;
        return a.unit_type < b.unit_type;
    });
    h.conflict = evaluate_disjunction(h);
    return h;
}

bool member_less(const Hypothesis& a, const Hypothesis& b) {
    return a.members < b.members;
}

// Keeps a hypothesis if it ranks among the m best of its size for at least
// one of its members.
void apply_cap(std::vector<Candidate>& level, const ElementSet& elements, int m,
               std::vector<PrunedHypothesis>& pruned) {
    if (m <= 0) return;
    std::vector<std::vector<std::size_t>> touching(elements.size());
    for (std::size_t h = 0; h < level.size(); ++h) {
        for (auto p : level[h].positions) touching[p].push_back(h);
    }
    std::vector<bool> keep(level.size(), false);
    for (auto& list : touching) {
        std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
            const auto& ha = level[a].hypothesis;
            const auto& hb = level[b].hypothesis;
            if (ha.conflict != hb.conflict) return ha.conflict < hb.conflict;
            return member_less(ha, hb);
        });
        for (std::size_t r = 0; r < list.size() && r < static_cast<std::size_t>(m); ++r) keep[list[r]] = true;
    }
    std::vector<Candidate> kept;
    for (std::size_t h = 0; h < level.size(); ++h) {
        if (keep[h]) {
            kept.push_back(std::move(level[h]));
        } else {
            pruned.push_back({level[h].hypothesis.members, "cap"});
        }
    }
    level = std::move(kept);
}

}  // namespace

GenerationResult generate_hypotheses(const ElementSet& elements, std::span<const UnitTemplate> templates,
                                     const ClassificationTree& tree, const ClassifyConfig& config) {
    validate(config);
    if (static_cast<std::size_t>(elements.conflicts.rows()) != elements.size() ||
        elements.classes.size() != elements.size()) {
        throw DataError("generate_hypotheses: element set is inconsistent");
    }
    std::vector<const UnitTemplate*> active;
    for (const auto& t : templates) {
        if (t.level == config.level) active.push_back(&t);
    }

    GenerationResult out;
    std::set<std::vector<std::size_t>> seen;
    std::vector<Candidate> frontier;
    std::string reason;

    for (std::size_t e = 0; e < elements.size(); ++e) {
        std::vector<std::size_t> pos{e};
        seen.insert(pos);
        ++out.candidates;
        if (auto h = evaluate(elements, pos, active, tree, config, reason)) {
            frontier.push_back({std::move(pos), std::move(*h)});
        } else {
            out.pruned.push_back({ids_of(elements, pos), reason});
        }
    }
    apply_cap(frontier, elements, config.per_track_cap, out.pruned);

    while (!frontier.empty()) {
        for (const auto& c : frontier) out.hypotheses.push_back(c.hypothesis);
        std::vector<Candidate> next;
        for (const auto& c : frontier) {
            for (std::size_t e = 0; e < elements.size(); ++e) {
                if (std::binary_search(c.positions.begin(), c.positions.end(), e)) continue;
                std::vector<std::size_t> pos = c.positions;
                pos.insert(std::upper_bound(pos.begin(), pos.end(), e), e);
                if (!seen.insert(pos).second) continue;
                ++out.candidates;
                if (auto h = evaluate(elements, pos, active, tree, config, reason)) {
                    next.push_back({std::move(pos), std::move(*h)});
                } else {
                    out.pruned.push_back({ids_of(elements, pos), reason});
                }
            }
        }
        apply_cap(next, elements, config.per_track_cap, out.pruned);
        frontier = std::move(next);
    }
    return out;
}

std::vector<SubProblem> partition_problem_space(std::span<const Hypothesis> hypotheses) {
    std::map<TrackId, std::vector<std::size_t>> by_track;
    for (std::size_t h = 0; h < hypotheses.size(); ++h) {
        for (auto t : hypotheses[h].members) by_track[t].push_back(h);
    }
    std::vector<bool> placed(hypotheses.size(), false);
    std::vector<SubProblem> out;
    for (std::size_t seed = 0; seed < hypotheses.size(); ++seed) {
        if (placed[seed]) continue;
        // flood fill along shared tracks
        std::vector<std::size_t> members;
        std::set<TrackId> tracks;
        std::deque<std::size_t> queue{seed};
        placed[seed] = true;
        while (!queue.empty()) {
            auto h = queue.front();
            queue.pop_front();
            members.push_back(h);
            for (auto t : hypotheses[h].members) {
                if (!tracks.insert(t).second) continue;
                for (auto other : by_track[t]) {
                    if (!placed[other]) {
                        placed[other] = true;
                        queue.push_back(other);
                    }
                }
            }
        }
        std::sort(members.begin(), members.end());
        SubProblem sp;
        for (auto h : members) sp.hypotheses.push_back(hypotheses[h]);
        sp.tracks.assign(tracks.begin(), tracks.end());
        out.push_back(std::move(sp));
    }
    return out;
}

double set_conflict(std::span<const Hypothesis> hypotheses) {
    std::vector<double> values;
    values.reserve(hypotheses.size());
    for (const auto& h : hypotheses) values.push_back(h.conflict);
    std::sort(values.begin(), values.end());
    double keep = 1.0;
    for (double v : values) keep *= 1.0 - v;
    return 1.0 - keep;
}

namespace {

std::vector<std::vector<TrackId>> sorted_member_lists(std::span<const Hypothesis> hs) {
    std::vector<std::vector<TrackId>> lists;
    lists.reserve(hs.size());
    for (const auto& h : hs) lists.push_back(h.members);
    std::sort(lists.begin(), lists.end());
    return lists;
}

}  // namespace

bool tie_break_less(std::span<const Hypothesis> a, std::span<const Hypothesis> b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return sorted_member_lists(a) < sorted_member_lists(b);
}

namespace {

// Depth-first search over consistent extensions. Every complete set holds
// exactly one hypothesis through the first uncovered track, so each node
// branches on the hypotheses through the uncovered track with fewest
// candidates. A branch is cut when it can no longer beat BEST: its weight
// -ln(1 - C) plus, for each uncovered track, the cheapest per-member share
// of a hypothesis that could still cover it.
class ConsistentSetSearch {
public:
    explicit ConsistentSetSearch(const SubProblem& problem) : tracks_(problem.tracks) {
        hyps_ = problem.hypotheses;
        std::stable_sort(hyps_.begin(), hyps_.end(), [](const Hypothesis& a, const Hypothesis& b) {
            if (a.conflict != b.conflict) return a.conflict < b.conflict;
            return a.members < b.members;
        });
        std::map<TrackId, std::size_t> slot;
        for (std::size_t t = 0; t < tracks_.size(); ++t) slot[tracks_[t]] = t;
        members_.resize(hyps_.size());
        through_.resize(tracks_.size());
        share_.resize(hyps_.size());
        for (std::size_t h = 0; h < hyps_.size(); ++h) {
            for (auto id : hyps_[h].members) {
                auto it = slot.find(id);
                if (it == slot.end()) throw DataError("hypothesis references a track outside its sub-problem");
                members_[h].push_back(it->second);
                through_[it->second].push_back(h);
            }
            share_[h] = weight(hyps_[h].conflict) / static_cast<double>(members_[h].size());
        }
        covered_.assign(tracks_.size(), false);
        uncovered_ = tracks_.size();
    }

    HypothesisSet run() {
        search(0.0);
        if (!best_) throw DataError("no complete consistent hypothesis set exists");
        HypothesisSet out;
        for (auto h : *best_) out.hypotheses.push_back(hyps_[h]);
        out.conflict = best_conflict_;
        out.explored = explored_;
        return out;
    }

private:
    static double weight(double c) { return -std::log1p(-c); }

    void search(double w) {
        ++explored_;
        if (uncovered_ == 0) {
            consider();
            return;
        }
        if (best_ && current_.size() + 1 > best_->size() && w >= best_weight_) return;
        std::optional<std::size_t> pivot;
        std::size_t fewest = 0;
        double bound = 0.0;
        for (std::size_t t = 0; t < tracks_.size(); ++t) {
            if (covered_[t]) continue;
            std::size_t options = 0;
            double cheapest = std::numeric_limits<double>::infinity();
            for (auto h : through_[t]) {
                if (!consistent(h)) continue;
                ++options;
                cheapest = std::min(cheapest, share_[h]);
            }
            if (options == 0) return;
            bound += cheapest;
            if (!pivot || options < fewest) {
                pivot = t;
                fewest = options;
            }
        }
        // slack keeps rounding from cutting a set that ties BEST
        if (best_ && w + bound > best_weight_ + 1e-9 * (1.0 + best_weight_)) return;
        for (auto h : through_[*pivot]) {
            if (!consistent(h)) continue;
            push(h);
            search(w + weight(hyps_[h].conflict));
            pop(h);
        }
    }

    bool consistent(std::size_t h) const {
        for (auto t : members_[h]) {
            if (covered_[t]) return false;
        }
        return true;
    }

    void push(std::size_t h) {
        current_.push_back(h);
        for (auto t : members_[h]) covered_[t] = true;
        uncovered_ -= members_[h].size();
    }

    void pop(std::size_t h) {
        current_.pop_back();
        for (auto t : members_[h]) covered_[t] = false;
        uncovered_ += members_[h].size();
    }

    void consider() {
        std::vector<Hypothesis> cur;
        for (auto h : current_) cur.push_back(hyps_[h]);
        double c = set_conflict(cur);
        if (best_) {
            if (c > best_conflict_) return;
            if (c == best_conflict_) {
                std::vector<Hypothesis> best;
                for (auto h : *best_) best.push_back(hyps_[h]);
                if (!tie_break_less(cur, best)) return;
            }
        }
        best_ = current_;
        best_conflict_ = c;
        best_weight_ = weight(c);
    }

    std::vector<TrackId> tracks_;
    std::vector<Hypothesis> hyps_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::vector<std::size_t>> through_;  // hypotheses through each track, by conflict
    std::vector<double> share_;
    std::vector<bool> covered_;
    std::size_t uncovered_ = 0;
    std::vector<std::size_t> current_;
    std::optional<std::vector<std::size_t>> best_;
    double best_conflict_ = 0.0;
    double best_weight_ = 0.0;
    std::size_t explored_ = 0;
};

}  // namespace

HypothesisSet best_consistent_set(const SubProblem& problem) {
    return ConsistentSetSearch(problem).run();
}

namespace {

Hypothesis fallback_hypothesis(TrackId id, double conflict) {
    Hypothesis h;
    h.members = {id};
    h.disjuncts = {{"unaggregated", conflict, 0.0, conflict}};
    h.conflict = conflict;
    h.fallback = true;
    return h;
}

Unit present(const Hypothesis& h, double delta) {
    Unit u;
    u.members = h.members;
    u.formation_conflict = h.formation_conflict;
    u.conflict = h.conflict;
    for (const auto& d : h.disjuncts) {
        if (d.conflict <= h.conflict + delta) {
            u.types.push_back({d.unit_type, d.classification_conflict, d.support, d.conflict});
        }
    }
    return u;
}

}  // namespace

ClassifyResult classify_elements(const ElementSet& elements, std::span<const UnitTemplate> templates,
                                 const ClassificationTree& tree, const ClassifyConfig& config) {
    ClassifyResult out;
    out.generation = generate_hypotheses(elements, templates, tree, config);

    std::vector<Hypothesis> all = out.generation.hypotheses;
    for (auto id : elements.ids) all.push_back(fallback_hypothesis(id, config.fallback_conflict));

    auto problems = partition_problem_space(all);
    out.subproblems = problems.size();
    for (const auto& sp : problems) {
        HypothesisSet best = best_consistent_set(sp);
        out.explored += best.explored;
        for (const auto& h : best.hypotheses) {
            if (h.fallback) {
                out.unaggregated.push_back(h.members.front());
            } else if (h.conflict >= config.keep_threshold) {
                out.demoted.push_back(h);
                out.unaggregated.insert(out.unaggregated.end(), h.members.begin(), h.members.end());
            } else {
                out.units.push_back(present(h, config.present_delta));
            }
        }
    }
    std::sort(out.units.begin(), out.units.end(),
              [](const Unit& a, const Unit& b) { return a.members < b.members; });
    std::sort(out.unaggregated.begin(), out.unaggregated.end());
    return out;
}

SituationPicture classify_units(std::span<const Track> tracks, std::span<const UnitTemplate> templates,
                                const ClassificationTree& tree, const ConflictConfig& conflicts,
                                const ClassifyConfig& config, ClassifyResult* diagnostics) {
    ElementSet elements = elements_from_tracks(tracks, conflicts);
    ClassifyResult r = classify_elements(elements, templates, tree, config);
    SituationPicture picture;
    picture.tracks.assign(tracks.begin(), tracks.end());
    picture.units = r.units;
    picture.unaggregated = r.unaggregated;
    if (diagnostics) *diagnostics = std::move(r);
    return picture;
}

// ---- next level ------------------------------------------------------------

Track centroid_track(TrackId id, std::span<const Track* const> members) {
    if (members.empty()) throw DataError("centroid_track: no members");
    std::set<double> times;
    for (const auto* t : members) {
        for (const auto& r : t->reports) times.insert(r.time);
    }
    Track out;
    out.id = id;
    out.resolved_class = ClassificationTree::kRoot;
    for (double t : times) {
        double x = 0.0;
        double y = 0.0;
        int n = 0;
        for (const auto* m : members) {
            if (t < m->start_time() || t > m->end_time()) continue;
            Position p = position_at(*m, t);
            x += p.x;
            y += p.y;
            ++n;
        }
        Report r;
        r.from = "centroid";
        r.position = {x / n, y / n};
        r.time = t;
        r.classification = ClassificationTree::kRoot;
        out.reports.push_back(std::move(r));
        out.report_ids.push_back(out.report_ids.size());
    }
    return out;
}

HigherLevelPicture aggregate_next_level(const SituationPicture& picture, std::span<const UnitTemplate> templates,
                                        const ClassificationTree& tree, const ConflictConfig& conflicts,
                                        const ClassifyConfig& config) {
    std::map<TrackId, const Track*> by_id;
    for (const auto& t : picture.tracks) by_id[t.id] = &t;

    std::vector<ClassId> unit_types;
    for (const auto& t : templates) {
        if (t.level < config.level && !tree.contains(t.unit_type)) unit_types.push_back(t.unit_type);
    }
    ClassificationTree extended = tree.with_children(tree.root(), unit_types);

    HigherLevelPicture out;
    std::vector<Track> centroids;
    auto add = [&](ClassId cls, std::vector<TrackId> members) {
        std::vector<const Track*> ptrs;
        for (auto id : members) ptrs.push_back(by_id.at(id));
        TrackId id = static_cast<TrackId>(out.elements.size());
        centroids.push_back(centroid_track(id, ptrs));
        out.elements.push_back({id, std::move(cls), std::move(members)});
    };
    for (const auto& u : picture.units) add(u.types.empty() ? tree.root() : u.types.front().unit_type, u.members);
    for (auto id : picture.unaggregated) add(by_id.at(id)->resolved_class, {id});

    ElementSet elements = elements_from_tracks(centroids, conflicts);
    for (std::size_t i = 0; i < out.elements.size(); ++i) elements.classes[i] = out.elements[i].class_id;
    ClassifyResult r = classify_elements(elements, templates, extended, config);
    out.units = std::move(r.units);
    out.unaggregated = std::move(r.unaggregated);
    return out;
}

}  // namespace forceagg
