#include "forceagg/domain.hpp"

#include "forceagg/error.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace forceagg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const char* const kCsvHeader = "from,name,x,y,time,classification,orientation";

double finite_number(const json& obj, const char* key, std::size_t line, const std::string& field) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, field, "missing");
    if (!it->is_number()) throw ParseError(line, field, "expected a number");
    double v = it->get<double>();
    if (!std::isfinite(v)) throw ParseError(line, field, "not finite");
    return v;
}

double parse_double(const std::string& text, std::size_t line, const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParseError(line, field, "expected a number, got '" + text + "'");
    }
    if (used != text.size()) throw ParseError(line, field, "trailing characters in '" + text + "'");
    if (!std::isfinite(v)) throw ParseError(line, field, "not finite");
    return v;
}

void finish_report(Report& r, std::size_t line, const ClassificationTree& tree) {
    if (r.time < 0.0) throw ParseError(line, "time", "must be non-negative");
    if (!tree.contains(r.classification)) {
        throw ParseError(line, "classification", "unknown class '" + r.classification + "'");
    }
    r.orientation = normalize_angle(r.orientation);
}

Report parse_json_line(const std::string& text, std::size_t line, const ClassificationTree& tree) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, "record", e.what());
    }
    if (!obj.is_object()) throw ParseError(line, "record", "expected a JSON object");

    Report r;
    auto from = obj.find("from");
    if (from == obj.end() || !from->is_string()) throw ParseError(line, "from", "expected a string");
    r.from = from->get<std::string>();

    auto name = obj.find("name");
    if (name != obj.end() && !name->is_null()) {
        if (!name->is_string()) throw ParseError(line, "name", "expected a string or null");
        r.name = name->get<std::string>();
    }

    auto pos = obj.find("position");
    if (pos == obj.end() || !pos->is_object()) throw ParseError(line, "position", "expected an object");
    r.position.x = finite_number(*pos, "x", line, "position.x");
    r.position.y = finite_number(*pos, "y", line, "position.y");
    r.time = finite_number(obj, "time", line, "time");

    auto cls = obj.find("classification");
    if (cls == obj.end() || !cls->is_string()) throw ParseError(line, "classification", "expected a string");
    r.classification = cls->get<std::string>();
    r.orientation = finite_number(obj, "orientation", line, "orientation");

    finish_report(r, line, tree);
    return r;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(text);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!text.empty() && text.back() == ',') cells.emplace_back();
    return cells;
}

Report parse_csv_line(const std::string& text, std::size_t line, const ClassificationTree& tree) {
    auto cells = split_csv(text);
    if (cells.size() != 7) {
        throw ParseError(line, "record", "expected 7 comma-separated columns, got " + std::to_string(cells.size()));
    }
    Report r;
    r.from = cells[0];
    if (!cells[1].empty()) r.name = cells[1];
    r.position.x = parse_double(cells[2], line, "x");
    r.position.y = parse_double(cells[3], line, "y");
    r.time = parse_double(cells[4], line, "time");
    r.classification = cells[5];
    r.orientation = parse_double(cells[6], line, "orientation");
    finish_report(r, line, tree);
    return r;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::vector<Report> parse_report_log(std::istream& in, const ClassificationTree& tree) {
    std::vector<Report> out;
    std::string text;
    std::size_t line = 0;
    enum class Format { Unknown, JsonLines, Csv } format = Format::Unknown;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (blank(text)) continue;
        if (format == Format::Unknown) {
            auto first = text.find_first_not_of(" \t");
            if (text[first] == '{') {
                format = Format::JsonLines;
            } else if (text == kCsvHeader) {
                format = Format::Csv;
                continue;
            } else {
                throw ParseError(line, "record", "expected a JSON object or the CSV header '" + std::string(kCsvHeader) + "'");
            }
        }
        out.push_back(format == Format::JsonLines ? parse_json_line(text, line, tree)
                                                  : parse_csv_line(text, line, tree));
    }
    return out;
}

std::string serialize_report(const Report& r) {
    ordered_json obj;
    obj["from"] = r.from;
    obj["name"] = r.name ? ordered_json(*r.name) : ordered_json(nullptr);
    obj["position"] = {{"x", r.position.x}, {"y", r.position.y}};
    obj["time"] = r.time;
    obj["classification"] = r.classification;
    obj["orientation"] = r.orientation;
    return obj.dump();
}

void write_report_log(std::ostream& out, std::span<const Report> reports) {
    for (const auto& r : reports) out << serialize_report(r) << '\n';
}

// Tree file: {"root": "unknown", "parents": {"child": "parent", ...}}
ClassificationTree load_tree(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("classification tree: ") + e.what());
    }
    if (doc.contains("root") && doc["root"] != ClassificationTree::kRoot) {
        throw DataError("classification tree: root must be 'unknown'");
    }
    if (!doc.contains("parents") || !doc["parents"].is_object()) {
        throw DataError("classification tree: missing 'parents' object");
    }
    std::map<ClassId, ClassId> parents;
    for (const auto& [child, parent] : doc["parents"].items()) {
        if (!parent.is_string()) throw DataError("classification tree: parent of '" + child + "' must be a string");
        parents[child] = parent.get<std::string>();
    }
    return ClassificationTree(std::move(parents));
}

std::string tree_to_json(const ClassificationTree& tree) {
    ordered_json doc;
    doc["root"] = tree.root();
    doc["parents"] = ordered_json::object();
    for (const auto& [child, parent] : tree.parent_map()) doc["parents"][child] = parent;
    return doc.dump(2);
}

// Template file: {"templates": [{"unit_type", "level", "spacing_min",
// "spacing_max", "composition": [{"class", "count"}]}]}
std::vector<UnitTemplate> load_templates(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("templates: ") + e.what());
    }
    if (!doc.contains("templates") || !doc["templates"].is_array()) {
        throw DataError("templates: missing 'templates' array");
    }
    std::vector<UnitTemplate> out;
    try {
        for (const auto& t : doc["templates"]) {
            UnitTemplate u;
            u.unit_type = t.at("unit_type").get<std::string>();
            u.level = t.value("level", 1);
            u.spacing_min = t.value("spacing_min", 50.0);
            u.spacing_max = t.value("spacing_max", 200.0);
            for (const auto& s : t.at("composition")) {
                u.composition.push_back({s.at("class").get<std::string>(), s.at("count").get<int>()});
            }
            validate(u);
            out.push_back(std::move(u));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("templates: ") + e.what());
    }
    return out;
}

std::string templates_to_json(std::span<const UnitTemplate> templates) {
    ordered_json arr = ordered_json::array();
    for (const auto& t : templates) {
        ordered_json comp = ordered_json::array();
        for (const auto& s : t.composition) comp.push_back({{"class", s.class_id}, {"count", s.count}});
        arr.push_back({{"unit_type", t.unit_type},
                       {"level", t.level},
                       {"spacing_min", t.spacing_min},
                       {"spacing_max", t.spacing_max},
                       {"composition", comp}});
    }
    ordered_json doc;
    doc["templates"] = arr;
    return doc.dump(2);
}

}  // namespace forceagg
