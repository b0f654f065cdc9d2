#pragma once
// Core value types for force aggregation: observation reports, the vehicle
// classification tree, tracks, unit templates and the situation picture.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace forceagg {

using ClassId = std::string;
using TrackId = int;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Position {
    double x = 0.0;  // meters east
    double y = 0.0;  // meters north

    friend bool operator==(const Position&, const Position&) = default;
};

double distance(const Position& a, const Position& b);

// Wraps an angle into [0, 2*pi).
double normalize_angle(double radians);

// Minimal absolute difference between two headings, in [0, pi].
double angular_difference(double a, double b);

struct Report {
    std::string from;
    std::optional<std::string> name;  // ground truth, scoring only
    Position position;
    double time = 0.0;
    ClassId classification;
    double orientation = 0.0;  // radians, [0, 2*pi)

    friend bool operator==(const Report&, const Report&) = default;
};

// Vehicle classes ordered in a tree rooted at "unknown". Immutable after
// construction.
class ClassificationTree {
public:
    static constexpr const char* kRoot = "unknown";

    // parent_of maps every non-root class to its parent. Throws DataError if
    // the result is not a single tree rooted at "unknown".
    explicit ClassificationTree(std::map<ClassId, ClassId> parent_of);

    // unknown -> {tracked, wheeled}; tracked -> {mbt, apc_tracked, atgm_launcher}
    static ClassificationTree default_tree();

    bool contains(const ClassId& id) const;
    const ClassId& root() const { return root_; }
    std::optional<ClassId> parent(const ClassId& id) const;
    int depth(const ClassId& id) const;
    std::vector<ClassId> nodes() const;
    const std::map<ClassId, ClassId>& parent_map() const { return parent_; }

    // True iff `ancestor` lies on the path from `descendant` to the root
    // (inclusive of descendant itself).
    bool is_ancestor_or_self(const ClassId& ancestor, const ClassId& descendant) const;

    // Ancestor of `id` at tree depth `depth`, or `id` itself if it is
    // shallower.
    ClassId truncate(const ClassId& id, int depth) const;

    // Copy with extra children attached under `parent`.
    ClassificationTree with_children(const ClassId& parent, std::span<const ClassId> children) const;

private:
    void require(const ClassId& id) const;

    ClassId root_ = kRoot;
    std::map<ClassId, ClassId> parent_;
    std::map<ClassId, int> depth_;
};

// Ancestor-or-self in either direction. Symmetric.
bool is_descendant(const ClassId& a, const ClassId& b, const ClassificationTree& tree);

// Deepest class among the given ones; throws DataError if two of them are not
// on a common root path.
ClassId resolve_class(std::span<const ClassId> classes, const ClassificationTree& tree);
ClassId resolve_class(std::span<const Report> reports, const ClassificationTree& tree);

struct Track {
    TrackId id = 0;
    std::vector<Report> reports;          // sorted by time
    std::vector<std::size_t> report_ids;  // index of each report in the source log
    ClassId resolved_class;

    double start_time() const { return reports.front().time; }
    double end_time() const { return reports.back().time; }
};

// Builds a track: sorts by time (stable) and resolves the class. Throws
// DataError on empty input or class-inconsistent reports.
Track make_track(TrackId id, std::vector<Report> reports, std::vector<std::size_t> report_ids,
                 const ClassificationTree& tree);

struct TemplateSlot {
    ClassId class_id;
    int count = 1;

    friend bool operator==(const TemplateSlot&, const TemplateSlot&) = default;
};

struct UnitTemplate {
    std::string unit_type;
    std::vector<TemplateSlot> composition;
    double spacing_min = 50.0;
    double spacing_max = 200.0;
    int level = 1;  // 1 = platoon, 2 = company

    int total_count() const;
};

// Throws DataError if counts < 1, spacing_min >= spacing_max or the
// composition is empty.
void validate(const UnitTemplate& t);

std::vector<UnitTemplate> default_templates();

const UnitTemplate* find_template(std::span<const UnitTemplate> templates, const std::string& unit_type);

struct UnitTypeCandidate {
    std::string unit_type;
    double classification_conflict = 0.0;
    double support = 0.0;
    double conflict = 0.0;
};

struct Unit {
    std::vector<TrackId> members;
    std::vector<UnitTypeCandidate> types;  // best first
    double formation_conflict = 0.0;
    double conflict = 0.0;
};

struct SituationPicture {
    std::vector<Track> tracks;
    std::vector<Unit> units;
    std::vector<TrackId> unaggregated;
};

// Every track id appears in exactly one unit or in unaggregated, and no
// unknown ids are referenced.
bool is_complete_partition(const SituationPicture& picture);

// ---- file formats -------------------------------------------------------

// Reads JSON-lines (one report object per line) or CSV with header
// `from,name,x,y,time,classification,orientation`. Blank lines are skipped.
std::vector<Report> parse_report_log(std::istream& in, const ClassificationTree& tree);

// One JSON object per line, keys in canonical order.
void write_report_log(std::ostream& out, std::span<const Report> reports);
std::string serialize_report(const Report& report);

ClassificationTree load_tree(std::istream& in);
std::string tree_to_json(const ClassificationTree& tree);

std::vector<UnitTemplate> load_templates(std::istream& in);
std::string templates_to_json(std::span<const UnitTemplate> templates);

}  // namespace forceagg
