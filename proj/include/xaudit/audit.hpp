#pragma once

// Dataset audit: detectors find candidate artifact regions, the attribution
// map says how much of the model's evidence sits inside them.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xaudit/calibration.hpp"
#include "xaudit/checkpoint.hpp"
#include "xaudit/detectors.hpp"
#include "xaudit/explain.hpp"
#include "xaudit/rle.hpp"
#include "xaudit/train.hpp"

namespace xaudit {

inline constexpr int kReportVersion = 1;

struct AuditConfig {
    DetectorConfig detectors;
    AttributionMethod method = AttributionMethod::Occlusion;
    OcclusionConfig occlusion;
    int critical_grid = 8;
    double critical_gamma = 0.5;
    double s_flag = 0.25;
};

inline void validate(const AuditConfig& c) {
    validate(c.occlusion);
    require(c.s_flag >= 0.0 && c.s_flag <= 1.0, ErrorKind::ConfigError, "s_flag must lie in [0, 1]");
    require(c.critical_grid >= 1, ErrorKind::ConfigError, "critical_grid must be positive");
    require(c.critical_gamma > 0.0 && c.critical_gamma < 1.0, ErrorKind::ConfigError, "critical_gamma must lie in (0, 1)");
    const auto& d = c.detectors;
    require(d.padding_min_width >= 1, ErrorKind::ConfigError, "padding_min_width must be positive");
    require(d.circle_k > 0.0 && d.circle_thickness > 0.0, ErrorKind::ConfigError, "circle_k and circle_thickness must be positive");
    require(d.circle_min_support >= 0.0 && d.circle_min_support <= 1.0, ErrorKind::ConfigError, "circle_min_support must lie in [0, 1]");
    require(d.circle_min_radius > 0.0 && d.circle_min_radius < 0.5, ErrorKind::ConfigError, "circle_min_radius must lie in (0, 0.5)");
    require(d.table_band >= 0.0 && d.table_band < 1.0, ErrorKind::ConfigError, "table_band must lie in [0, 1)");
    require(d.table_k > 0.0, ErrorKind::ConfigError, "table_k must be positive");
    require(d.marker_min_size >= 2, ErrorKind::ConfigError, "marker_min_size must be at least 2");
    require(d.marker_contrast >= 0.0, ErrorKind::ConfigError, "marker_contrast must be non-negative");
    require(d.range_violation >= 0.0 && d.range_violation < 1.0, ErrorKind::ConfigError, "range_violation must lie in [0, 1)");
    require(d.dynamic_range_accuracy > 0.0 && d.dynamic_range_accuracy <= 1.0, ErrorKind::ConfigError,
            "dynamic_range_accuracy must lie in (0, 1]");
    require(d.cluster_association > 0.0 && d.cluster_association <= 1.0, ErrorKind::ConfigError,
            "cluster_association must lie in (0, 1]");
}

inline Json to_json(const AuditConfig& c) {
    Json d;
    d["padding_min_width"] = c.detectors.padding_min_width;
    d["circle_k"] = c.detectors.circle_k;
    d["circle_thickness"] = c.detectors.circle_thickness;
    d["circle_min_support"] = c.detectors.circle_min_support;
    d["circle_min_radius"] = c.detectors.circle_min_radius;
    d["table_band"] = c.detectors.table_band;
    d["table_k"] = c.detectors.table_k;
    d["marker_min_size"] = c.detectors.marker_min_size;
    d["marker_contrast"] = c.detectors.marker_contrast;
    d["range_violation"] = c.detectors.range_violation;
    d["dynamic_range_accuracy"] = c.detectors.dynamic_range_accuracy;
    d["cluster_association"] = c.detectors.cluster_association;
    Json o;
    o["patch"] = c.occlusion.patch;
    o["stride"] = c.occlusion.stride;
    o["baseline"] = to_string(c.occlusion.baseline);
    Json j;
    j["method"] = to_string(c.method);
    j["occlusion"] = std::move(o);
    j["critical_grid"] = c.critical_grid;
    j["critical_gamma"] = c.critical_gamma;
    j["s_flag"] = c.s_flag;
    j["detectors"] = std::move(d);
    return j;
}

inline AuditConfig audit_config_from_json(const Json& j, AuditConfig c = {}, ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "audit config", err);
    if (const Json* m = o.find("method")) {
        require(m->is_string(), err, "audit config: method must be a string");
        c.method = parse_attribution_method(m->get<std::string>());
    }
    if (const Json* occ = o.find("occlusion")) {
        StrictObject oo(*occ, "audit config.occlusion", err);
        c.occlusion.patch = static_cast<int>(oo.integer_or("patch", c.occlusion.patch));
        c.occlusion.stride = static_cast<int>(oo.integer_or("stride", c.occlusion.stride));
        if (oo.has("baseline")) c.occlusion.baseline = parse_baseline(oo.string("baseline"));
        oo.finish();
    }
    c.critical_grid = static_cast<int>(o.integer_or("critical_grid", c.critical_grid));
    c.critical_gamma = o.number_or("critical_gamma", c.critical_gamma);
    c.s_flag = o.number_or("s_flag", c.s_flag);
    if (const Json* det = o.find("detectors")) {
        StrictObject d(*det, "audit config.detectors", err);
        auto& x = c.detectors;
        x.padding_min_width = static_cast<int>(d.integer_or("padding_min_width", x.padding_min_width));
        x.circle_k = d.number_or("circle_k", x.circle_k);
        x.circle_thickness = d.number_or("circle_thickness", x.circle_thickness);
        x.circle_min_support = d.number_or("circle_min_support", x.circle_min_support);
        x.circle_min_radius = d.number_or("circle_min_radius", x.circle_min_radius);
        x.table_band = d.number_or("table_band", x.table_band);
        x.table_k = d.number_or("table_k", x.table_k);
        x.marker_min_size = static_cast<int>(d.integer_or("marker_min_size", x.marker_min_size));
        x.marker_contrast = d.number_or("marker_contrast", x.marker_contrast);
        x.range_violation = d.number_or("range_violation", x.range_violation);
        x.dynamic_range_accuracy = d.number_or("dynamic_range_accuracy", x.dynamic_range_accuracy);
        x.cluster_association = d.number_or("cluster_association", x.cluster_association);
        d.finish();
    }
    o.finish();
    validate(c);
    return c;
}

struct AuditFinding {
    std::string image_id;
    IssueKind kind = IssueKind::PaddingConfound;
    double severity = 0.0;
    RegionMask region;
    Json evidence = Json::object();

    std::string id() const { return image_id + ":" + to_string(kind); }
};

struct KindAggregate {
    std::size_t findings = 0;
    std::size_t flagged_images = 0;
    double flagged_fraction = 0.0;
    double mean_severity = 0.0;

    friend bool operator==(const KindAggregate&, const KindAggregate&) = default;
};

struct AuditError {
    std::string image_id;
    std::string kind;
    std::string message;
};

struct AuditReport {
    int version = kReportVersion;
    std::string dataset;
    std::string model;
    std::size_t image_count = 0;
    Json config = Json::object();
    Json model_input = Json::object();
    std::vector<AuditFinding> findings;
    std::map<IssueKind, KindAggregate> aggregates;
    Json calibration = Json::object();
    std::vector<AuditError> errors;
    double s_flag = 0.25;
};

inline AuditFinding score_finding(const AttributionMap& map, const RegionMask& region) {
    AuditFinding f;
    f.image_id = map.image_id;
    f.kind = region.kind;
    f.severity = mass_fraction(map, region.mask);
    f.region = region;
    return f;
}

// Per kind: share of images with at least one finding at or above s_flag,
// and mean severity over that kind's findings.
inline std::map<IssueKind, KindAggregate> compute_aggregates(const std::vector<AuditFinding>& findings,
                                                             std::size_t image_count, double s_flag) {
    std::map<IssueKind, KindAggregate> agg;
    std::map<IssueKind, std::vector<std::string>> flagged;
    std::map<IssueKind, double> sum;
    for (auto k : kAllIssueKinds) agg[k] = {};
    for (const auto& f : findings) {
        auto& a = agg[f.kind];
        a.findings += 1;
        sum[f.kind] += f.severity;
        if (f.severity >= s_flag) flagged[f.kind].push_back(f.image_id);
    }
    for (auto& [k, a] : agg) {
        auto& ids = flagged[k];
        std::sort(ids.begin(), ids.end());
        a.flagged_images = static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
        a.flagged_fraction = image_count ? static_cast<double>(a.flagged_images) / static_cast<double>(image_count) : 0.0;
        a.mean_severity = a.findings ? sum[k] / static_cast<double>(a.findings) : 0.0;
    }
    return agg;
}

inline bool has_flagged_findings(const AuditReport& r) {
    return std::any_of(r.findings.begin(), r.findings.end(), [&](const AuditFinding& f) { return f.severity >= r.s_flag; });
}

// Attribution map for one model-space input, resampled to the image grid.
inline AttributionMap attribution_for(const PrototypeModel& model, const Plane& input, const AuditConfig& cfg,
                                      const Plane& dataset_mean, int width, int height, unsigned workers = 1) {
    const int target = default_target(model, input);
    AttributionMap map;
    switch (cfg.method) {
        case AttributionMethod::Occlusion:
            map = occlusion_map(model, input, cfg.occlusion, target, &dataset_mean, workers);
            break;
        case AttributionMethod::GradInput:
            map = saliency_map(model, input, target);
            break;
        case AttributionMethod::CriticalSubset: {
            const Plane zero(input.width, input.height);
            const Plane& base = cfg.occlusion.baseline == Baseline::DatasetMean ? dataset_mean : zero;
            const auto outcome = critical_factors(model, input, cfg.critical_grid, cfg.critical_gamma, base, workers);
            if (const auto* nr = std::get_if<NotReachable>(&outcome))
                fail(ErrorKind::ZeroMass, "critical subset not reachable (best confidence " + std::to_string(nr->best_confidence) + ")");
            map = critical_set_map(std::get<CriticalSet>(outcome), input.width, input.height, target);
            break;
        }
    }
    return to_image_grid(std::move(map), width, height);
}

// Candidate regions for one image, in kind order.
inline std::vector<RegionMask> detect_regions(const ImageSlice& image, const DetectorConfig& cfg) {
    std::vector<RegionMask> out;
    for (auto r : {detect_padding(image, cfg), detect_fov_circle(image, cfg), detect_table(image, cfg),
                   detect_corner_marker(image, cfg)})
        if (r) out.push_back(std::move(*r));
    return out;
}

inline AuditReport audit_dataset(const PrototypeModel& model, const Dataset& ds, const AuditConfig& cfg, unsigned workers = 1) {
    validate(cfg);
    validate(model);
    const auto& manifest = ds.manifest;
    require(!ds.images.empty(), ErrorKind::EmptyDataset, "no images to audit");
    check_labels(model.arch, manifest);

    AuditReport report;
    report.dataset = dataset_id(ds);
    report.model = model_id(model);
    report.image_count = ds.images.size();
    report.config = to_json(cfg);
    report.model_input = Json{{"normalization", to_string(model.input.normalization)},
                              {"use_calibration", model.input.use_calibration},
                              {"lo", model.input.lo},
                              {"hi", model.input.hi}};
    report.s_flag = cfg.s_flag;

    const auto calib = detect_calibration_anomaly(manifest, ds.images, cfg.detectors);
    report.calibration = to_json(calib, manifest);
    std::vector<char> calib_flag(ds.images.size(), 0);
    for (auto i : calib.flagged) calib_flag[i] = 1;

    const auto inputs = prepare_inputs(model, manifest, ds.images, workers);
    const Plane mean = mean_plane(inputs);

    struct Slot {
        std::vector<AuditFinding> findings;
        std::vector<AuditError> errors;
    };
    std::vector<Slot> slots(ds.images.size());
    parallel_for(ds.images.size(), workers, [&](std::size_t i) {
        const auto& image = ds.images[i];
        auto& slot = slots[i];
        try {
            auto regions = detect_regions(image, cfg.detectors);
            if (calib_flag[i]) {
                RegionMask r{IssueKind::CalibrationShift, Mask(image.width, image.height, true), Json::object()};
                Json tests = Json::array();
                if (std::find(calib.cluster_flagged.begin(), calib.cluster_flagged.end(), i) != calib.cluster_flagged.end())
                    tests.push_back("metadata");
                if (std::find(calib.range_flagged.begin(), calib.range_flagged.end(), i) != calib.range_flagged.end())
                    tests.push_back("range_violation");
                r.params["tests"] = std::move(tests);
                r.params["cluster"] = calib.cluster_of[i];
                r.params["violation_fraction"] = calib.violation_fraction[i];
                regions.insert(regions.begin(), std::move(r));
            }
            if (regions.empty()) return;
            std::optional<AttributionMap> map;
            try {
                map = attribution_for(model, inputs[i], cfg, mean, image.width, image.height, 1);
                map->image_id = image.id;
            } catch (const Error& e) {
                slot.errors.push_back({image.id, std::string(to_string(e.kind())), e.detail()});
            }
            for (auto& region : regions) {
                AuditFinding f;
                if (map) {
                    try {
                        f = score_finding(*map, region);
                    } catch (const Error& e) {
                        if (region.kind != IssueKind::CalibrationShift) {
                            slot.errors.push_back({image.id, std::string(to_string(e.kind())), e.detail()});
                            continue;
                        }
                    }
                }
                if (!map || f.image_id.empty()) {
                    if (region.kind != IssueKind::CalibrationShift) continue;
                    // Metadata findings stand without attribution: the whole image is affected.
                    f.image_id = image.id;
                    f.kind = region.kind;
                    f.severity = 1.0;
                    f.region = region;
                    f.evidence["attribution_unavailable"] = true;
                }
                f.evidence["method"] = to_string(cfg.method);
                f.evidence["region_pixels"] = region.mask.count();
                if (map) f.evidence["attribution_total"] = map->total();
                slot.findings.push_back(std::move(f));
            }
        } catch (const Error& e) {
            slot.errors.push_back({image.id, std::string(to_string(e.kind())), e.detail()});
        }
    });

    for (auto& s : slots) {
        for (auto& f : s.findings) report.findings.push_back(std::move(f));
        for (auto& e : s.errors) report.errors.push_back(std::move(e));
    }
    std::stable_sort(report.findings.begin(), report.findings.end(), [](const AuditFinding& a, const AuditFinding& b) {
        return a.image_id != b.image_id ? a.image_id < b.image_id : a.kind < b.kind;
    });
    std::stable_sort(report.errors.begin(), report.errors.end(),
                     [](const AuditError& a, const AuditError& b) { return a.image_id < b.image_id; });
    report.aggregates = compute_aggregates(report.findings, report.image_count, cfg.s_flag);
    return report;
}

// ---------------------------------------------------------------------------
// Report JSON

inline Json aggregates_json(const std::map<IssueKind, KindAggregate>& aggregates) {
    Json agg = Json::object();
    for (const auto& [k, a] : aggregates) {
        Json ja;
        ja["findings"] = a.findings;
        ja["flagged_images"] = a.flagged_images;
        ja["flagged_fraction"] = a.flagged_fraction;
        ja["mean_severity"] = a.mean_severity;
        agg[to_string(k)] = std::move(ja);
    }
    return agg;
}

inline Json to_json(const AuditReport& r) {
    Json j;
    j["version"] = r.version;
    j["dataset"] = r.dataset;
    j["model"] = r.model;
    j["image_count"] = r.image_count;
    j["config"] = r.config;
    j["model_input"] = r.model_input;
    Json findings = Json::array();
    for (const auto& f : r.findings) {
        Json jf;
        jf["id"] = f.id();
        jf["image"] = f.image_id;
        jf["kind"] = to_string(f.kind);
        jf["severity"] = f.severity;
        Json region;
        region["width"] = f.region.mask.width;
        region["height"] = f.region.mask.height;
        region["runs"] = rle_encode(f.region.mask);
        jf["region_rle"] = std::move(region);
        jf["region_params"] = f.region.params;
        jf["evidence"] = f.evidence;
        findings.push_back(std::move(jf));
    }
    j["findings"] = std::move(findings);
    j["aggregates"] = aggregates_json(r.aggregates);
    j["calibration"] = r.calibration;
    Json errors = Json::array();
    for (const auto& e : r.errors) errors.push_back(Json{{"image", e.image_id}, {"kind", e.kind}, {"message", e.message}});
    j["errors"] = std::move(errors);
    return j;
}

inline AuditReport report_from_json(const Json& j) {
    constexpr auto err = ErrorKind::SchemaError;
    StrictObject o(j, "report", err);
    AuditReport r;
    r.version = static_cast<int>(o.integer("version"));
    require(r.version == kReportVersion, err, "report: unsupported version " + std::to_string(r.version));
    r.dataset = o.string("dataset");
    r.model = o.string("model");
    r.image_count = static_cast<std::size_t>(o.integer("image_count"));
    r.config = o.at("config");
    const AuditConfig cfg = audit_config_from_json(r.config, {}, err);
    r.s_flag = cfg.s_flag;
    {
        const Json& mi = o.at("model_input");
        StrictObject mo(mi, "report model_input", err);
        const auto norm = mo.string("normalization");
        require(norm == "per_image_zscore" || norm == "global_minmax" || norm == "raw", err,
                "report: unknown normalization '" + norm + "'");
        mo.boolean("use_calibration");
        mo.number("lo");
        mo.number("hi");
        mo.finish();
        r.model_input = mi;
    }
    const Json& findings = o.at("findings");
    require(findings.is_array(), err, "report: findings must be an array");
    for (const auto& jf : findings) {
        StrictObject fo(jf, "report finding", err);
        AuditFinding f;
        const std::string id = fo.string("id");
        f.image_id = fo.string("image");
        f.kind = parse_issue_kind(fo.string("kind"), err);
        f.severity = fo.number("severity");
        require(f.severity >= 0.0 && f.severity <= 1.0, err, "report: severity outside [0, 1]");
        require(id == f.id(), err, "report: finding id '" + id + "' does not match its image and kind");
        StrictObject ro(fo.at("region_rle"), "report region", err);
        const int w = static_cast<int>(ro.integer("width"));
        const int h = static_cast<int>(ro.integer("height"));
        require(w > 0 && h > 0, err, "report: region dims must be positive");
        const Json& runs = ro.at("runs");
        require(runs.is_array(), err, "report: runs must be an array");
        std::vector<std::uint32_t> rv;
        for (const auto& v : runs) rv.push_back(static_cast<std::uint32_t>(ro.as_integer(v, "runs")));
        ro.finish();
        f.region.kind = f.kind;
        f.region.mask = rle_decode(rv, w, h);
        f.region.params = fo.at("region_params");
        f.evidence = fo.at("evidence");
        fo.finish();
        r.findings.push_back(std::move(f));
    }
    r.aggregates = compute_aggregates(r.findings, r.image_count, r.s_flag);
    require(o.at("aggregates") == aggregates_json(r.aggregates), err,
            "report: aggregates do not match the findings");
    r.calibration = o.at("calibration");
    const Json& errors = o.at("errors");
    require(errors.is_array(), err, "report: errors must be an array");
    for (const auto& je : errors) {
        StrictObject eo(je, "report error", err);
        r.errors.push_back({eo.string("image"), eo.string("kind"), eo.string("message")});
        eo.finish();
    }
    o.finish();
    return r;
}

}  // namespace xaudit
