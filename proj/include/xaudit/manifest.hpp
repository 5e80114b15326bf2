#pragma once

// Dataset manifest: task kind, labels and per-image calibration metadata.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xaudit/json_util.hpp"

namespace xaudit {

enum class Task { Classification, Regression };

inline std::string to_string(Task t) { return t == Task::Classification ? "classification" : "regression"; }

inline Task parse_task(const std::string& s, ErrorKind kind = ErrorKind::SchemaError) {
    if (s == "classification") return Task::Classification;
    if (s == "regression") return Task::Regression;
    fail(kind, "unknown task '" + s + "'");
}

// Affine map from stored pixel values to physical units.
struct CalibrationMeta {
    double slope = 1.0;
    double intercept = 0.0;
    std::optional<std::pair<double, double>> declared_range;

    friend bool operator==(const CalibrationMeta&, const CalibrationMeta&) = default;
};

inline void validate(const CalibrationMeta& m, const std::string& where = "calibration") {
    require(std::isfinite(m.slope) && std::isfinite(m.intercept), ErrorKind::SchemaError, where + ": non-finite value");
    require(m.slope != 0.0, ErrorKind::SchemaError, where + ": slope must be non-zero");
    if (m.declared_range) {
        require(std::isfinite(m.declared_range->first) && std::isfinite(m.declared_range->second),
                ErrorKind::SchemaError, where + ": non-finite declared_range");
        require(m.declared_range->first < m.declared_range->second, ErrorKind::SchemaError,
                where + ": declared_range min must be below max");
    }
}

struct ManifestEntry {
    std::string id;
    double label = 0.0;
    CalibrationMeta calibration;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    Task task = Task::Classification;
    int class_count = 2;  // meaningful for classification only
    std::vector<ManifestEntry> entries;

    int class_of(std::size_t i) const { return static_cast<int>(entries[i].label); }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Ids double as file stems, so they are restricted to a portable alphabet.
inline bool is_valid_image_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

inline void validate(const DatasetManifest& m) {
    if (m.task == Task::Classification)
        require(m.class_count >= 2, ErrorKind::SchemaError, "class_count must be at least 2");
    std::set<std::string> ids;
    for (const auto& e : m.entries) {
        require(is_valid_image_id(e.id), ErrorKind::SchemaError, "invalid image id '" + e.id + "'");
        require(ids.insert(e.id).second, ErrorKind::DuplicateId, "duplicate image id '" + e.id + "'");
        require(std::isfinite(e.label), ErrorKind::SchemaError, "entry '" + e.id + "': non-finite label");
        if (m.task == Task::Classification) {
            require(e.label == std::floor(e.label), ErrorKind::SchemaError,
                    "entry '" + e.id + "': classification label must be an integer");
            require(e.label >= 0 && e.label < m.class_count, ErrorKind::LabelOutOfRange,
                    "entry '" + e.id + "': label " + std::to_string(static_cast<long long>(e.label)) +
                        " outside [0, " + std::to_string(m.class_count) + ")");
        }
        validate(e.calibration, "entry '" + e.id + "' calibration");
    }
}

inline CalibrationMeta calibration_from_json(const Json& j, const std::string& where) {
    StrictObject obj(j, where);
    CalibrationMeta m;
    m.slope = obj.number("slope");
    m.intercept = obj.number("intercept");
    const Json& range = obj.at("declared_range");
    if (!range.is_null()) {
        if (!range.is_array() || range.size() != 2) fail(ErrorKind::SchemaError, where + ": declared_range must be [min, max] or null");
        m.declared_range = std::make_pair(obj.as_number(range[0], "declared_range"), obj.as_number(range[1], "declared_range"));
    }
    obj.finish();
    validate(m, where);
    return m;
}

inline Json calibration_to_json(const CalibrationMeta& m) {
    Json j;
    j["slope"] = m.slope;
    j["intercept"] = m.intercept;
    if (m.declared_range)
        j["declared_range"] = Json::array({m.declared_range->first, m.declared_range->second});
    else
        j["declared_range"] = nullptr;
    return j;
}

inline DatasetManifest manifest_from_json(const Json& root) {
    StrictObject top(root, "manifest");
    DatasetManifest m;
    m.task = parse_task(top.string("task"));
    if (m.task == Task::Classification) {
        const long long k = top.integer("class_count");
        require(k >= 2 && k <= 1'000'000, ErrorKind::SchemaError, "class_count must be an integer >= 2");
        m.class_count = static_cast<int>(k);
    } else {
        m.class_count = 0;
        if (const Json* k = top.find("class_count"); k && !k->is_null())
            fail(ErrorKind::SchemaError, "manifest: class_count is only valid for classification");
    }
    const Json& entries = top.at("entries");
    if (!entries.is_array()) fail(ErrorKind::SchemaError, "manifest: entries must be an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string where = "manifest entry " + std::to_string(i);
        StrictObject eo(entries[i], where);
        ManifestEntry e;
        e.id = eo.string("id");
        e.label = eo.number("label");
        e.calibration = calibration_from_json(eo.at("calibration"), where + " calibration");
        eo.finish();
        m.entries.push_back(std::move(e));
    }
    top.finish();
    validate(m);
    return m;
}

inline DatasetManifest load_manifest(const std::string& text) { return manifest_from_json(parse_json(text, "manifest")); }

inline Json manifest_to_json(const DatasetManifest& m) {
    Json j;
    j["task"] = to_string(m.task);
    if (m.task == Task::Classification) j["class_count"] = m.class_count;
    Json entries = Json::array();
    for (const auto& e : m.entries) {
        Json je;
        je["id"] = e.id;
        if (m.task == Task::Classification)
            je["label"] = static_cast<long long>(e.label);
        else
            je["label"] = e.label;
        je["calibration"] = calibration_to_json(e.calibration);
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    return j;
}

inline std::string write_manifest(const DatasetManifest& m) { return dump_json(manifest_to_json(m)); }

}  // namespace xaudit
