#include "forceagg/domain.hpp"

#include "forceagg/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace forceagg {

double distance(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

double normalize_angle(double radians) {
    double r = std::fmod(radians, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;  // -tiny + 2pi can round up to 2pi
    return r;
}

double angular_difference(double a, double b) {
    double d = std::fmod(std::fabs(a - b), kTwoPi);
    return d > kPi ? kTwoPi - d : d;
}

// ---- ClassificationTree --------------------------------------------------

ClassificationTree::ClassificationTree(std::map<ClassId, ClassId> parent_of)
    : parent_(std::move(parent_of)) {
    if (parent_.count(root_) != 0) {
        throw DataError("classification tree: root 'unknown' cannot have a parent");
    }
    depth_[root_] = 0;
    for (const auto& [child, parent] : parent_) {
        if (child.empty()) throw DataError("classification tree: empty class id");
        // walk to the root, detecting cycles and dangling parents
        std::set<ClassId> seen{child};
        ClassId cur = parent;
        int d = 1;
        while (cur != root_) {
            auto it = parent_.find(cur);
            if (it == parent_.end()) {
                throw DataError("classification tree: class '" + child + "' has unknown ancestor '" + cur + "'");
            }
            if (!seen.insert(cur).second) {
                throw DataError("classification tree: cycle through '" + cur + "'");
            }
            cur = it->second;
            ++d;
        }
        depth_[child] = d;
    }
}

ClassificationTree ClassificationTree::default_tree() {
    return ClassificationTree({
        {"tracked", kRoot},
        {"wheeled", kRoot},
        {"mbt", "tracked"},
        {"apc_tracked", "tracked"},
        {"atgm_launcher", "tracked"},
    });
}

bool ClassificationTree::contains(const ClassId& id) const {
    return depth_.count(id) != 0;
}

void ClassificationTree::require(const ClassId& id) const {
    if (!contains(id)) throw DataError("unknown classification '" + id + "'");
}

std::optional<ClassId> ClassificationTree::parent(const ClassId& id) const {
    require(id);
    auto it = parent_.find(id);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

int ClassificationTree::depth(const ClassId& id) const {
    require(id);
    return depth_.at(id);
}

std::vector<ClassId> ClassificationTree::nodes() const {
    std::vector<ClassId> out;
    out.reserve(depth_.size());
    for (const auto& [id, d] : depth_) out.push_back(id);
    return out;
}

bool ClassificationTree::is_ancestor_or_self(const ClassId& ancestor, const ClassId& descendant) const {
    require(ancestor);
    require(descendant);
    int gap = depth_.at(descendant) - depth_.at(ancestor);
    if (gap < 0) return false;
    const ClassId* cur = &descendant;
    for (int i = 0; i < gap; ++i) cur = &parent_.at(*cur);
    return *cur == ancestor;
}

ClassId ClassificationTree::truncate(const ClassId& id, int depth) const {
    require(id);
    ClassId cur = id;
    for (int d = depth_.at(id); d > std::max(depth, 0); --d) cur = parent_.at(cur);
    return cur;
}

ClassificationTree ClassificationTree::with_children(const ClassId& parent,
                                                     std::span<const ClassId> children) const {
    require(parent);
    auto map = parent_;
    for (const auto& c : children) {
        if (contains(c)) throw DataError("classification tree: class '" + c + "' already present");
        map[c] = parent;
    }
    return ClassificationTree(std::move(map));
}

bool is_descendant(const ClassId& a, const ClassId& b, const ClassificationTree& tree) {
    return tree.is_ancestor_or_self(a, b) || tree.is_ancestor_or_self(b, a);
}

ClassId resolve_class(std::span<const ClassId> classes, const ClassificationTree& tree) {
    if (classes.empty()) throw DataError("resolve_class: no classes");
    ClassId deepest = classes.front();
    for (const auto& c : classes) {
        if (tree.depth(c) > tree.depth(deepest)) deepest = c;
    }
    // every class must be an ancestor-or-self of the deepest one, otherwise
    // two of them sit on different branches
    for (const auto& c : classes) {
        if (!tree.is_ancestor_or_self(c, deepest)) {
            throw DataError("type conflict: '" + c + "' and '" + deepest + "' are unrelated classes");
        }
    }
    return deepest;
}

ClassId resolve_class(std::span<const Report> reports, const ClassificationTree& tree) {
    std::vector<ClassId> classes;
    classes.reserve(reports.size());
    for (const auto& r : reports) classes.push_back(r.classification);
    return resolve_class(classes, tree);
}

Track make_track(TrackId id, std::vector<Report> reports, std::vector<std::size_t> report_ids,
                 const ClassificationTree& tree) {
    if (reports.empty()) throw DataError("track " + std::to_string(id) + " has no reports");
    if (report_ids.empty()) {
        report_ids.resize(reports.size());
        for (std::size_t i = 0; i < reports.size(); ++i) report_ids[i] = i;
    }
    if (report_ids.size() != reports.size()) {
        throw DataError("track " + std::to_string(id) + ": report id count mismatch");
    }
    std::vector<std::size_t> order(reports.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return reports[a].time < reports[b].time;
    });
    Track t;
    t.id = id;
    t.reports.reserve(reports.size());
    t.report_ids.reserve(reports.size());
    for (auto i : order) {
        t.reports.push_back(std::move(reports[i]));
        t.report_ids.push_back(report_ids[i]);
    }
    t.resolved_class = resolve_class(std::span<const Report>(t.reports), tree);
    return t;
}

// ---- templates -------------------------------------------------------------

int UnitTemplate::total_count() const {
    int n = 0;
    for (const auto& s : composition) n += s.count;
    return n;
}

void validate(const UnitTemplate& t) {
    if (t.unit_type.empty()) throw DataError("template with empty unit_type");
    if (t.composition.empty()) throw DataError("template '" + t.unit_type + "' has empty composition");
    for (const auto& s : t.composition) {
        if (s.count < 1) throw DataError("template '" + t.unit_type + "': slot count must be >= 1");
    }
    if (!(t.spacing_min < t.spacing_max)) {
        throw DataError("template '" + t.unit_type + "': spacing_min must be < spacing_max");
    }
    if (t.level < 1) throw DataError("template '" + t.unit_type + "': level must be >= 1");
}

std::vector<UnitTemplate> default_templates() {
    // The company commander's vehicle is taken to be an APC.
    return {
        {"mech_platoon", {{"apc_tracked", 4}}, 50.0, 200.0, 1},
        {"mbt_platoon", {{"mbt", 5}}, 50.0, 200.0, 1},
        {"at_platoon", {{"atgm_launcher", 5}}, 50.0, 200.0, 1},
        {"mech_company_mbt", {{"apc_tracked", 1}, {"mech_platoon", 3}, {"mbt_platoon", 1}}, 200.0, 2000.0, 2},
        {"mech_company_at", {{"apc_tracked", 1}, {"mech_platoon", 3}, {"at_platoon", 1}}, 200.0, 2000.0, 2},
    };
}

const UnitTemplate* find_template(std::span<const UnitTemplate> templates, const std::string& unit_type) {
    for (const auto& t : templates) {
        if (t.unit_type == unit_type) return &t;
    }
    return nullptr;
}

bool is_complete_partition(const SituationPicture& picture) {
    std::map<TrackId, int> seen;
    for (const auto& t : picture.tracks) seen[t.id] = 0;
    if (seen.size() != picture.tracks.size()) return false;
    auto mark = [&](TrackId id) {
        auto it = seen.find(id);
        if (it == seen.end()) return false;
        ++it->second;
        return true;
    };
    for (const auto& u : picture.units) {
        if (u.members.empty()) return false;
        for (auto id : u.members) {
            if (!mark(id)) return false;
        }
    }
    for (auto id : picture.unaggregated) {
        if (!mark(id)) return false;
    }
    return std::all_of(seen.begin(), seen.end(), [](const auto& kv) { return kv.second == 1; });
}

}  // namespace forceagg
