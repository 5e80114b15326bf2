#pragma once

// Synthetic CT-like corpora with a genuine label signal and injected,
// ground-truth-annotated data-quality issues.
//
// Clean image i (stream kCleanImage + i of the corpus seed):
//   label      classification: i mod class_count; regression: uniform [0, 1)
//   blob       centre = image centre + integer jitter in [-J, J] per axis,
//              radius uniform integer in [radius_min, radius_max]
//   level      classification: delta * (label + 1) / class_count
//              regression:     delta * label
//   pixel      round(background + sigma * N(0,1) + level * [inside blob]),
//              clamped to [0, 65535]; one normal per pixel, row-major
//
// Issue injection for image i uses stream kIssue + kind * 2^24 + i of the
// issue seed: u = uniform(), r = uniform_int(k). The image is "aligned" when
// u < correlation; its artifact class is then the label class, otherwise r.
// Presence-type artifacts appear when the artifact class is k - 1; the corner
// marker is always drawn and its intensity encodes the artifact class.

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/issues.hpp"
#include "xaudit/json_util.hpp"
#include "xaudit/rle.hpp"
#include "xaudit/rng.hpp"

namespace xaudit {

struct SignalSpec {
    int radius_min = 4;
    int radius_max = 8;
    double intensity_delta = 300.0;
    double noise_sigma = 40.0;
    double background = 1000.0;
    int center_jitter = -1;  // -1: image_size / 10
};

struct CorpusSpec {
    int image_size = 64;
    int count = 200;
    Task task = Task::Classification;
    int class_count = 2;
    SignalSpec signal;
    std::uint64_t seed = 0;

    int jitter() const { return signal.center_jitter >= 0 ? signal.center_jitter : image_size / 10; }
    int classes() const { return task == Task::Classification ? class_count : 2; }
};

inline void validate(const CorpusSpec& s) {
    require(s.image_size >= 32 && s.image_size <= 4096, ErrorKind::SpecError, "image_size must be in [32, 4096]");
    require(s.count >= 2, ErrorKind::SpecError, "count must be at least 2");
    if (s.task == Task::Classification) require(s.class_count >= 2, ErrorKind::SpecError, "class_count must be at least 2");
    require(std::isfinite(s.signal.noise_sigma) && s.signal.noise_sigma >= 0.0, ErrorKind::SpecError,
            "noise_sigma must be >= 0");
    require(std::isfinite(s.signal.intensity_delta), ErrorKind::SpecError, "intensity_delta must be finite");
    require(std::isfinite(s.signal.background) && s.signal.background >= 0.0 && s.signal.background <= 65535.0,
            ErrorKind::SpecError, "background must lie in [0, 65535]");
    require(s.signal.radius_min >= 1 && s.signal.radius_max >= s.signal.radius_min, ErrorKind::SpecError,
            "radius range must satisfy 1 <= radius_min <= radius_max");
    require(s.jitter() >= 0 && s.signal.radius_max + s.jitter() < s.image_size / 2, ErrorKind::SpecError,
            "signal blob (radius_max + center_jitter) must fit inside the image");
}

struct IssueParams {
    // PaddingConfound
    int pad_width = 6;
    int pad_value = 0;
    bool pad_left = true, pad_right = true, pad_top = false, pad_bottom = false;
    // CircularArtifact
    double ring_radius = 0.0;  // 0: 0.4 * image_size
    double ring_thickness = 2.0;
    double ring_intensity = 600.0;
    // PatientTable
    double table_fraction = 0.1;
    int table_gap = 2;
    double table_intensity = 800.0;
    // CalibrationShift
    double intercept_shift = -500.0;
    // CornerMarker
    int marker_size = 8;
    double marker_intensity = 400.0;
    int marker_corner = 0;  // 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right
};

struct IssueSpec {
    IssueKind kind = IssueKind::CornerMarker;
    double correlation = 1.0;
    IssueParams params;
};

struct ImageTruth {
    std::string id;
    Mask signal;
    std::map<IssueKind, Mask> artifacts;
    std::set<IssueKind> injected;
    std::map<IssueKind, bool> aligned;
    std::map<IssueKind, int> artifact_class;
    CalibrationMeta true_calibration;

    Mask artifact_mask() const {
        Mask m(signal.width, signal.height);
        for (const auto& [k, a] : artifacts) m = mask_union(m, a);
        return m;
    }
};

struct GroundTruth {
    std::vector<ImageTruth> images;
};

struct Corpus {
    Dataset dataset;
    GroundTruth truth;
};

// ---------------------------------------------------------------------------

inline int label_class(const DatasetManifest& m, std::size_t i) {
    if (m.task == Task::Classification) return m.class_of(i);
    return m.entries[i].label >= 0.5 ? 1 : 0;
}

inline Corpus gen_clean(const CorpusSpec& spec) {
    validate(spec);
    const int S = spec.image_size;
    const int J = spec.jitter();
    const double centre = (S - 1) / 2.0;

    Corpus c;
    c.dataset.manifest.task = spec.task;
    c.dataset.manifest.class_count = spec.task == Task::Classification ? spec.class_count : 0;
    c.dataset.images.resize(static_cast<std::size_t>(spec.count));
    c.dataset.manifest.entries.resize(static_cast<std::size_t>(spec.count));
    c.truth.images.resize(static_cast<std::size_t>(spec.count));

    for (int i = 0; i < spec.count; ++i) {
        Rng rng(spec.seed, streams::kCleanImage + static_cast<std::uint64_t>(i));
        char buf[32];
        std::snprintf(buf, sizeof buf, "img_%04d", i);
        const std::string id = buf;

        double label;
        double level;
        if (spec.task == Task::Classification) {
            label = i % spec.class_count;
            level = spec.signal.intensity_delta * (label + 1) / spec.class_count;
        } else {
            label = rng.uniform();
            level = spec.signal.intensity_delta * label;
        }
        const double cx = centre + static_cast<double>(rng.uniform_int(-J, J));
        const double cy = centre + static_cast<double>(rng.uniform_int(-J, J));
        const auto radius = static_cast<double>(rng.uniform_int(spec.signal.radius_min, spec.signal.radius_max));

        ImageSlice img{id, S, S, 65535, std::vector<std::uint16_t>(static_cast<std::size_t>(S) * S)};
        Mask signal(S, S);
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                const bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
                double v = spec.signal.background + spec.signal.noise_sigma * rng.normal();
                if (inside) {
                    v += level;
                    signal.set(x, y);
                }
                img.at(x, y) = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
            }
        }
        c.dataset.images[static_cast<std::size_t>(i)] = std::move(img);
        c.dataset.manifest.entries[static_cast<std::size_t>(i)] = ManifestEntry{id, label, CalibrationMeta{}};
        auto& t = c.truth.images[static_cast<std::size_t>(i)];
        t.id = id;
        t.signal = std::move(signal);
        t.true_calibration = CalibrationMeta{};
    }
    return c;
}

inline void validate(const IssueSpec& issue, int image_size) {
    const auto& p = issue.params;
    const int S = image_size;
    require(std::isfinite(issue.correlation) && issue.correlation >= 0.0 && issue.correlation <= 1.0, ErrorKind::SpecError,
            "correlation must lie in [0, 1]");
    switch (issue.kind) {
        case IssueKind::PaddingConfound:
            require(p.pad_width >= 1 && 2 * p.pad_width < S, ErrorKind::SpecError, "pad_width must be in [1, size/2)");
            require(p.pad_value >= 0 && p.pad_value <= 65535, ErrorKind::SpecError, "pad_value must be a 16-bit value");
            require(p.pad_left || p.pad_right || p.pad_top || p.pad_bottom, ErrorKind::SpecError, "padding needs a side");
            break;
        case IssueKind::CircularArtifact: {
            const double r = p.ring_radius > 0 ? p.ring_radius : 0.4 * S;
            require(p.ring_thickness > 0 && std::isfinite(p.ring_intensity), ErrorKind::SpecError, "invalid ring parameters");
            require(r + p.ring_thickness / 2 < S / 2.0, ErrorKind::SpecError, "ring must fit inside the image");
            break;
        }
        case IssueKind::PatientTable:
            require(p.table_fraction > 0 && p.table_fraction < 0.5, ErrorKind::SpecError, "table_fraction must be in (0, 0.5)");
            require(p.table_gap >= 0 && p.table_gap + std::max(1, static_cast<int>(std::lround(p.table_fraction * S))) <= S,
                    ErrorKind::SpecError, "table band must fit inside the image");
            require(std::isfinite(p.table_intensity), ErrorKind::SpecError, "invalid table intensity");
            break;
        case IssueKind::CalibrationShift:
            require(std::isfinite(p.intercept_shift), ErrorKind::SpecError, "intercept_shift must be finite");
            break;
        case IssueKind::CornerMarker:
            require(p.marker_size >= 1 && 2 * p.marker_size < S, ErrorKind::SpecError, "marker_size must be in [1, size/2)");
            require(p.marker_corner >= 0 && p.marker_corner <= 3, ErrorKind::SpecError, "marker_corner must be 0..3");
            require(std::isfinite(p.marker_intensity), ErrorKind::SpecError, "invalid marker intensity");
            break;
    }
}

namespace detail {

inline std::uint16_t clamp16(double v) { return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0)); }

// Geometry of a spatial artifact (before signal exclusion).
inline Mask artifact_geometry(const IssueSpec& issue, int W, int H) {
    const auto& p = issue.params;
    Mask m(W, H);
    switch (issue.kind) {
        case IssueKind::PaddingConfound:
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const bool on = (p.pad_left && x < p.pad_width) || (p.pad_right && x >= W - p.pad_width) ||
                                    (p.pad_top && y < p.pad_width) || (p.pad_bottom && y >= H - p.pad_width);
                    if (on) m.set(x, y);
                }
            break;
        case IssueKind::CircularArtifact: {
            const double r = p.ring_radius > 0 ? p.ring_radius : 0.4 * std::min(W, H);
            const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    if (std::abs(std::hypot(x - cx, y - cy) - r) <= p.ring_thickness / 2) m.set(x, y);
            break;
        }
        case IssueKind::PatientTable: {
            const int rows = std::max(1, static_cast<int>(std::lround(p.table_fraction * H)));
            const int y1 = H - p.table_gap;
            for (int y = y1 - rows; y < y1; ++y)
                for (int x = 0; x < W; ++x) m.set(x, y);
            break;
        }
        case IssueKind::CornerMarker: {
            const int s = p.marker_size;
            const int x0 = (p.marker_corner == 1 || p.marker_corner == 3) ? W - s : 0;
            const int y0 = (p.marker_corner == 2 || p.marker_corner == 3) ? H - s : 0;
            for (int y = y0; y < y0 + s; ++y)
                for (int x = x0; x < x0 + s; ++x) m.set(x, y);
            break;
        }
        case IssueKind::CalibrationShift: break;
    }
    return m;
}

}  // namespace detail

// Injects one issue into every image of the corpus (in place on a copy).
inline Corpus inject_issue(const Corpus& input, const IssueSpec& issue, std::uint64_t seed) {
    require(!input.dataset.images.empty(), ErrorKind::SpecError, "empty corpus");
    const int S = std::min(input.dataset.images[0].width, input.dataset.images[0].height);
    validate(issue, S);
    Corpus c = input;
    auto& m = c.dataset.manifest;
    const int k = m.task == Task::Classification ? m.class_count : 2;
    const auto& p = issue.params;

    for (std::size_t i = 0; i < c.dataset.images.size(); ++i) {
        auto& img = c.dataset.images[i];
        auto& truth = c.truth.images[i];
        Rng rng(seed, streams::kIssue + (static_cast<std::uint64_t>(issue.kind) << 24) + i);
        const double u = rng.uniform();
        const int r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
        const bool aligned = u < issue.correlation;
        const int cls = aligned ? label_class(m, i) : r;
        truth.aligned[issue.kind] = aligned;
        truth.artifact_class[issue.kind] = cls;

        if (issue.kind == IssueKind::CalibrationShift) {
            if (cls != k - 1) continue;
            auto& meta = m.entries[i].calibration;
            const double raw_shift = -p.intercept_shift / meta.slope;
            for (auto& px : img.pixels) {
                const double v = std::round(px + raw_shift);
                require(v >= 0 && v <= img.max_value, ErrorKind::SpecError,
                        "calibration shift pushes '" + img.id + "' outside the stored value range");
                px = static_cast<std::uint16_t>(v);
            }
            meta.intercept += p.intercept_shift;
            truth.true_calibration = meta;
            truth.injected.insert(issue.kind);
            continue;
        }

        const bool present = issue.kind == IssueKind::CornerMarker || cls == k - 1;
        if (!present) continue;

        Mask geom = detail::artifact_geometry(issue, img.width, img.height);
        const std::size_t sig = truth.signal.count();
        const std::size_t overlap = mask_overlap(geom, truth.signal);
        if (sig > 0 && 2 * overlap > sig)
            fail(ErrorKind::GeometryOverlap, "artifact would cover more than half of the signal in '" + img.id + "'");

        double marker_value = 0.0;
        if (issue.kind == IssueKind::CornerMarker) {
            // Artifact class 0 -> background - intensity, k-1 -> background + intensity.
            const double t = k > 1 ? 2.0 * cls / (k - 1) - 1.0 : 0.0;
            double bg = 0.0;
            for (auto px : img.pixels) bg += px;
            bg /= static_cast<double>(img.pixels.size());
            marker_value = std::round(bg) + p.marker_intensity * t;
        }

        Mask written(img.width, img.height);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (!geom.at(x, y) || truth.signal.at(x, y)) continue;
                auto& px = img.at(x, y);
                switch (issue.kind) {
                    case IssueKind::PaddingConfound: px = static_cast<std::uint16_t>(p.pad_value); break;
                    case IssueKind::CircularArtifact: px = detail::clamp16(px + p.ring_intensity); break;
                    case IssueKind::PatientTable: px = detail::clamp16(px + p.table_intensity); break;
                    case IssueKind::CornerMarker: px = detail::clamp16(marker_value); break;
                    case IssueKind::CalibrationShift: break;
                }
                written.set(x, y);
            }
        }
        // Later artifacts own the pixels they overwrite.
        for (auto& [kind, mask] : truth.artifacts)
            for (std::size_t b = 0; b < mask.bits.size(); ++b)
                if (written.bits[b]) mask.bits[b] = 0;
        truth.artifacts[issue.kind] = std::move(written);
        truth.injected.insert(issue.kind);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const SignalSpec& s) {
    Json j;
    j["radius_min"] = s.radius_min;
    j["radius_max"] = s.radius_max;
    j["intensity_delta"] = s.intensity_delta;
    j["noise_sigma"] = s.noise_sigma;
    j["background"] = s.background;
    j["center_jitter"] = s.center_jitter;
    return j;
}

inline Json to_json(const CorpusSpec& s) {
    Json j;
    j["image_size"] = s.image_size;
    j["count"] = s.count;
    j["task"] = to_string(s.task);
    j["class_count"] = s.class_count;
    j["signal"] = to_json(s.signal);
    j["seed"] = s.seed;
    return j;
}

inline Json to_json(const IssueSpec& s) {
    const auto& p = s.params;
    Json j;
    j["kind"] = to_string(s.kind);
    j["correlation"] = s.correlation;
    Json q;
    switch (s.kind) {
        case IssueKind::PaddingConfound:
            q["width"] = p.pad_width;
            q["value"] = p.pad_value;
            q["left"] = p.pad_left;
            q["right"] = p.pad_right;
            q["top"] = p.pad_top;
            q["bottom"] = p.pad_bottom;
            break;
        case IssueKind::CircularArtifact:
            q["radius"] = p.ring_radius;
            q["thickness"] = p.ring_thickness;
            q["intensity"] = p.ring_intensity;
            break;
        case IssueKind::PatientTable:
            q["fraction"] = p.table_fraction;
            q["gap"] = p.table_gap;
            q["intensity"] = p.table_intensity;
            break;
        case IssueKind::CalibrationShift: q["shift"] = p.intercept_shift; break;
        case IssueKind::CornerMarker:
            q["size"] = p.marker_size;
            q["intensity"] = p.marker_intensity;
            q["corner"] = p.marker_corner;
            break;
    }
    j["params"] = std::move(q);
    return j;
}

inline SignalSpec signal_from_json(const Json& j, ErrorKind err) {
    StrictObject o(j, "signal", err);
    SignalSpec s;
    s.radius_min = static_cast<int>(o.integer_or("radius_min", s.radius_min));
    s.radius_max = static_cast<int>(o.integer_or("radius_max", s.radius_max));
    s.intensity_delta = o.number_or("intensity_delta", s.intensity_delta);
    s.noise_sigma = o.number_or("noise_sigma", s.noise_sigma);
    s.background = o.number_or("background", s.background);
    s.center_jitter = static_cast<int>(o.integer_or("center_jitter", s.center_jitter));
    o.finish();
    return s;
}

inline CorpusSpec corpus_spec_from_json(const Json& j, CorpusSpec s = {}, ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "corpus", err);
    s.image_size = static_cast<int>(o.integer_or("image_size", s.image_size));
    s.count = static_cast<int>(o.integer_or("count", s.count));
    if (o.has("task")) s.task = parse_task(o.string("task"), err);
    s.class_count = static_cast<int>(o.integer_or("class_count", s.class_count));
    if (const Json* sig = o.find("signal")) s.signal = signal_from_json(*sig, err);
    if (const Json* seed = o.find("seed")) {
        if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0))
            fail(err, "corpus: seed must be a non-negative integer");
        s.seed = seed->get<std::uint64_t>();
    }
    o.finish();
    return s;
}

// Applies "key=value" style overrides (CLI) or JSON params to IssueParams.
inline void set_issue_param(IssueSpec& s, const std::string& key, double v, ErrorKind err = ErrorKind::ConfigError) {
    auto& p = s.params;
    auto as_int = [&](double d) {
        if (d != std::floor(d)) fail(err, "issue parameter '" + key + "' must be an integer");
        return static_cast<int>(d);
    };
    if (key == "corr" || key == "correlation") {
        s.correlation = v;
        return;
    }
    switch (s.kind) {
        case IssueKind::PaddingConfound:
            if (key == "width") p.pad_width = as_int(v);
            else if (key == "value") p.pad_value = as_int(v);
            else if (key == "left") p.pad_left = v != 0;
            else if (key == "right") p.pad_right = v != 0;
            else if (key == "top") p.pad_top = v != 0;
            else if (key == "bottom") p.pad_bottom = v != 0;
            else fail(err, "unknown padding parameter '" + key + "'");
            return;
        case IssueKind::CircularArtifact:
            if (key == "radius") p.ring_radius = v;
            else if (key == "thickness") p.ring_thickness = v;
            else if (key == "intensity") p.ring_intensity = v;
            else fail(err, "unknown circle parameter '" + key + "'");
            return;
        case IssueKind::PatientTable:
            if (key == "fraction") p.table_fraction = v;
            else if (key == "gap") p.table_gap = as_int(v);
            else if (key == "intensity") p.table_intensity = v;
            else fail(err, "unknown table parameter '" + key + "'");
            return;
        case IssueKind::CalibrationShift:
            if (key == "shift") p.intercept_shift = v;
            else fail(err, "unknown calibration-shift parameter '" + key + "'");
            return;
        case IssueKind::CornerMarker:
            if (key == "size") p.marker_size = as_int(v);
            else if (key == "intensity") p.marker_intensity = v;
            else if (key == "corner") p.marker_corner = as_int(v);
            else fail(err, "unknown corner-marker parameter '" + key + "'");
            return;
    }
}

inline IssueSpec issue_spec_from_json(const Json& j, ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "issue", err);
    IssueSpec s;
    s.kind = parse_issue_kind(o.string("kind"), err);
    s.correlation = o.number_or("correlation", s.correlation);
    if (const Json* params = o.find("params")) {
        if (!params->is_object()) fail(err, "issue: params must be an object");
        for (auto it = params->begin(); it != params->end(); ++it) {
            double v;
            if (it.value().is_boolean()) v = it.value().get<bool>() ? 1.0 : 0.0;
            else if (it.value().is_number()) v = it.value().get<double>();
            else fail(err, "issue parameter '" + it.key() + "' must be numeric");
            set_issue_param(s, it.key(), v, err);
        }
    }
    o.finish();
    return s;
}

inline Json ground_truth_to_json(const GroundTruth& gt) {
    Json images = Json::array();
    for (const auto& t : gt.images) {
        Json j;
        j["id"] = t.id;
        j["width"] = t.signal.width;
        j["height"] = t.signal.height;
        j["signal_rle"] = rle_encode(t.signal);
        j["artifact_rle"] = rle_encode(t.artifact_mask());
        Json by_kind = Json::object();
        for (const auto& [k, mask] : t.artifacts) by_kind[to_string(k)] = rle_encode(mask);
        j["artifact_rle_by_kind"] = std::move(by_kind);
        Json kinds = Json::array();
        for (auto k : t.injected) kinds.push_back(to_string(k));
        j["injected_kinds"] = std::move(kinds);
        Json aligned = Json::object();
        for (const auto& [k, a] : t.aligned) aligned[to_string(k)] = a;
        j["aligned"] = std::move(aligned);
        Json cls = Json::object();
        for (const auto& [k, c] : t.artifact_class) cls[to_string(k)] = c;
        j["artifact_class"] = std::move(cls);
        j["true_calibration"] = calibration_to_json(t.true_calibration);
        images.push_back(std::move(j));
    }
    Json out;
    out["version"] = 1;
    out["images"] = std::move(images);
    return out;
}

inline GroundTruth ground_truth_from_json(const Json& root) {
    StrictObject top(root, "ground_truth");
    require(top.integer("version") == 1, ErrorKind::SchemaError, "unsupported ground truth version");
    top.find("config");
    GroundTruth gt;
    const Json& images = top.at("images");
    if (!images.is_array()) fail(ErrorKind::SchemaError, "ground_truth: images must be an array");
    for (const auto& ji : images) {
        StrictObject o(ji, "ground_truth image");
        ImageTruth t;
        t.id = o.string("id");
        const int w = static_cast<int>(o.integer("width"));
        const int h = static_cast<int>(o.integer("height"));
        t.signal = rle_decode(o.at("signal_rle").get<std::vector<std::uint32_t>>(), w, h);
        o.at("artifact_rle");
        for (const auto& [key, runs] : o.at("artifact_rle_by_kind").items())
            t.artifacts[parse_issue_kind(key)] = rle_decode(runs.get<std::vector<std::uint32_t>>(), w, h);
        for (const auto& k : o.at("injected_kinds")) t.injected.insert(parse_issue_kind(k.get<std::string>()));
        for (const auto& [key, v] : o.at("aligned").items()) t.aligned[parse_issue_kind(key)] = v.get<bool>();
        for (const auto& [key, v] : o.at("artifact_class").items()) t.artifact_class[parse_issue_kind(key)] = v.get<int>();
        t.true_calibration = calibration_from_json(o.at("true_calibration"), "true_calibration");
        o.finish();
        gt.images.push_back(std::move(t));
    }
    top.finish();
    return gt;
}

// Clean corpus with each issue injected in order.
inline Corpus generate_corpus(const CorpusSpec& spec, const std::vector<IssueSpec>& issues) {
    Corpus c = gen_clean(spec);
    for (const auto& issue : issues) c = inject_issue(c, issue, spec.seed);
    return c;
}

inline Json corpus_config_json(const CorpusSpec& spec, const std::vector<IssueSpec>& issues) {
    Json j;
    j["corpus"] = to_json(spec);
    Json arr = Json::array();
    for (const auto& i : issues) arr.push_back(to_json(i));
    j["issues"] = std::move(arr);
    return j;
}

// Writes the dataset layout plus ground_truth.json (with a config echo).
inline void write_corpus(const std::filesystem::path& root, const Corpus& c, const Json& config_echo) {
    write_dataset(root, c.dataset);
    Json gt = ground_truth_to_json(c.truth);
    Json out;
    out["version"] = gt["version"];
    out["config"] = config_echo;
    out["images"] = std::move(gt["images"]);
    write_text_file((root / "ground_truth.json").string(), dump_json(out));
}

inline GroundTruth load_ground_truth(const std::filesystem::path& root) {
    return ground_truth_from_json(parse_json(read_text_file((root / "ground_truth.json").string()), "ground_truth"));
}

}  // namespace xaudit
