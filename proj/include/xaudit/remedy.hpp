#pragma once

// Remediation: findings -> ordered plan -> edited dataset plus provenance.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "xaudit/audit.hpp"

namespace xaudit {

enum class Action { Exclude, Recalibrate, CropPadding, RemoveTableRows, MaskRegion, Ignore };

inline std::string to_string(Action a) {
    switch (a) {
        case Action::Exclude: return "exclude";
        case Action::Recalibrate: return "recalibrate";
        case Action::CropPadding: return "crop_padding";
        case Action::RemoveTableRows: return "remove_table_rows";
        case Action::MaskRegion: return "mask_region";
        case Action::Ignore: return "ignore";
    }
    return "?";
}

inline Action parse_action(const std::string& s, ErrorKind err = ErrorKind::ConfigError) {
    for (auto a : {Action::Exclude, Action::Recalibrate, Action::CropPadding, Action::RemoveTableRows, Action::MaskRegion,
                   Action::Ignore})
        if (s == to_string(a)) return a;
    fail(err, "unknown remediation action '" + s + "'");
}

struct Fill {
    bool constant = false;  // false: background estimate
    double value = 0.0;
};

struct RemediationPolicy {
    std::map<IssueKind, Action> actions;
    double severity_threshold = 0.25;
    Fill fill;

    static RemediationPolicy defaults() {
        RemediationPolicy p;
        p.actions = {{IssueKind::CalibrationShift, Action::Exclude},
                     {IssueKind::PaddingConfound, Action::CropPadding},
                     {IssueKind::CircularArtifact, Action::MaskRegion},
                     {IssueKind::PatientTable, Action::RemoveTableRows},
                     {IssueKind::CornerMarker, Action::MaskRegion}};
        return p;
    }
};

inline void validate(const RemediationPolicy& p) {
    require(p.severity_threshold >= 0.0 && p.severity_threshold <= 1.0, ErrorKind::ConfigError,
            "severity_threshold must lie in [0, 1]");
    require(!p.fill.constant || (std::isfinite(p.fill.value) && p.fill.value >= 0.0 && p.fill.value <= 65535.0),
            ErrorKind::ConfigError, "constant fill must lie in [0, 65535]");
    for (const auto& [k, a] : p.actions) {
        const std::string where = "policy for " + to_string(k) + ": ";
        if (a == Action::CropPadding)
            require(k == IssueKind::PaddingConfound, ErrorKind::ConfigError, where + "crop_padding applies to padding only");
        if (a == Action::RemoveTableRows)
            require(k == IssueKind::PatientTable, ErrorKind::ConfigError, where + "remove_table_rows applies to patient_table only");
        if (a == Action::MaskRegion)
            require(k != IssueKind::CalibrationShift, ErrorKind::ConfigError,
                    where + "mask_region cannot apply to a whole-image calibration finding");
        if (a == Action::Recalibrate)
            require(k == IssueKind::CalibrationShift, ErrorKind::ConfigError,
                    where + "recalibrate applies to calibration_shift only");
    }
}

inline Json to_json(const RemediationPolicy& p) {
    Json j;
    Json actions = Json::object();
    for (auto k : kAllIssueKinds) {
        const auto it = p.actions.find(k);
        actions[to_string(k)] = it == p.actions.end() ? Json(nullptr) : Json(to_string(it->second));
    }
    j["actions"] = std::move(actions);
    j["severity_threshold"] = p.severity_threshold;
    if (p.fill.constant) j["fill"] = Json{{"constant", p.fill.value}};
    else j["fill"] = "background_estimate";
    return j;
}

// Keys given in the document override the defaults; a null action removes
// the kind from the policy.
inline RemediationPolicy policy_from_json(const Json& j, RemediationPolicy p = RemediationPolicy::defaults(),
                                          ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "policy", err);
    if (const Json* actions = o.find("actions")) {
        require(actions->is_object(), err, "policy: actions must be an object");
        for (auto it = actions->begin(); it != actions->end(); ++it) {
            const IssueKind k = parse_issue_kind(it.key(), err);
            if (it.value().is_null()) {
                p.actions.erase(k);
                continue;
            }
            require(it.value().is_string(), err, "policy: action for '" + it.key() + "' must be a string");
            p.actions[k] = parse_action(it.value().get<std::string>(), err);
        }
    }
    p.severity_threshold = o.number_or("severity_threshold", p.severity_threshold);
    if (const Json* fill = o.find("fill")) {
        if (fill->is_string()) {
            require(fill->get<std::string>() == "background_estimate", err, "policy: unknown fill mode");
            p.fill = {};
        } else {
            StrictObject fo(*fill, "policy.fill", err);
            p.fill = {true, fo.number("constant")};
            fo.finish();
        }
    }
    o.finish();
    validate(p);
    return p;
}

// ---------------------------------------------------------------------------
// Plan

struct PlannedAction {
    std::string image_id;
    IssueKind kind = IssueKind::PaddingConfound;
    Action action = Action::Ignore;
    Json params = Json::object();
    Mask region;
    std::vector<std::string> findings;
};

struct RemediationPlan {
    std::string dataset;
    Json policy = Json::object();
    std::vector<PlannedAction> actions;
};

namespace detail {

inline int action_phase(Action a) { return static_cast<int>(a); }

}  // namespace detail

// Actions are ordered by image id, then by phase (exclude, recalibrate, crop,
// table rows, mask), then kind. An excluded image gets no other action.
inline RemediationPlan plan_remediation(const AuditReport& report, const RemediationPolicy& policy) {
    validate(policy);
    RemediationPlan plan;
    plan.dataset = report.dataset;
    plan.policy = to_json(policy);
    for (const auto& f : report.findings) {
        const auto it = policy.actions.find(f.kind);
        if (it == policy.actions.end()) fail(ErrorKind::PolicyGap, "no policy entry for finding kind '" + to_string(f.kind) + "'");
        if (f.severity < policy.severity_threshold || it->second == Action::Ignore) continue;
        PlannedAction a{f.image_id, f.kind, it->second, f.region.params, f.region.mask, {f.id()}};
        if (a.action == Action::Recalibrate) {
            const Json& meta = report.calibration.at("metadata");
            const Json& ref = meta.at("clusters").at(meta.at("reference_cluster").get<std::size_t>());
            a.params = Json{{"slope", ref.at(0)}, {"intercept", ref.at(1)}};
        }
        plan.actions.push_back(std::move(a));
    }
    std::stable_sort(plan.actions.begin(), plan.actions.end(), [](const PlannedAction& a, const PlannedAction& b) {
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        if (a.action != b.action) return detail::action_phase(a.action) < detail::action_phase(b.action);
        return a.kind < b.kind;
    });
    std::vector<PlannedAction> kept;
    for (auto& a : plan.actions) {
        if (!kept.empty() && kept.back().image_id == a.image_id && kept.back().action == Action::Exclude) {
            kept.back().findings.push_back(a.findings.front());
            continue;
        }
        kept.push_back(std::move(a));
    }
    plan.actions = std::move(kept);
    return plan;
}

inline Json to_json(const PlannedAction& a) {
    Json j;
    j["image"] = a.image_id;
    j["kind"] = to_string(a.kind);
    j["action"] = to_string(a.action);
    j["findings"] = a.findings;
    j["params"] = a.params;
    Json region;
    region["width"] = a.region.width;
    region["height"] = a.region.height;
    region["runs"] = rle_encode(a.region);
    j["region_rle"] = std::move(region);
    return j;
}

inline Json to_json(const RemediationPlan& p) {
    Json j;
    j["version"] = 1;
    j["dataset"] = p.dataset;
    j["policy"] = p.policy;
    Json actions = Json::array();
    for (const auto& a : p.actions) actions.push_back(to_json(a));
    j["actions"] = std::move(actions);
    return j;
}

// ---------------------------------------------------------------------------
// Apply

struct ImageSummary {
    int width = 0;
    int height = 0;
    double mean = 0.0;
    int min = 0;
    int max = 0;
};

inline ImageSummary summarize(const ImageSlice& s) {
    ImageSummary out{s.width, s.height, 0.0, 0, 0};
    if (s.pixels.empty()) return out;
    double sum = 0.0;
    int lo = 65535, hi = 0;
    for (auto v : s.pixels) {
        sum += v;
        lo = std::min<int>(lo, v);
        hi = std::max<int>(hi, v);
    }
    out.mean = sum / static_cast<double>(s.pixels.size());
    out.min = lo;
    out.max = hi;
    return out;
}

inline Json to_json(const ImageSummary& s) {
    return Json{{"width", s.width}, {"height", s.height}, {"mean", s.mean}, {"min", s.min}, {"max", s.max}};
}

struct ProvenanceEntry {
    std::size_t sequence = 0;  // logical timestamp: position in the applied plan
    std::string image_id;
    IssueKind kind = IssueKind::PaddingConfound;
    Action action = Action::Ignore;
    std::vector<std::string> findings;
    Json params = Json::object();
    bool excluded = false;
    std::size_t pixels_changed = 0;
    ImageSummary before;
    ImageSummary after;
};

struct ProvenanceLog {
    std::vector<ProvenanceEntry> entries;
};

inline Json to_json(const ProvenanceEntry& e) {
    Json j;
    j["sequence"] = e.sequence;
    j["image"] = e.image_id;
    j["kind"] = to_string(e.kind);
    j["action"] = to_string(e.action);
    j["findings"] = e.findings;
    j["params"] = e.params;
    j["excluded"] = e.excluded;
    j["pixels_changed"] = e.pixels_changed;
    j["before"] = to_json(e.before);
    j["after"] = e.excluded ? Json(nullptr) : to_json(e.after);
    return j;
}

inline std::string to_jsonl(const ProvenanceLog& log) {
    std::string out;
    for (const auto& e : log.entries) out += to_json(e).dump() + "\n";
    return out;
}

struct RemediationResult {
    Dataset dataset;
    ProvenanceLog log;
};

namespace detail {

// Lower median of the pixels outside the region.
inline std::uint16_t background_estimate(const ImageSlice& s, const Mask& region) {
    std::vector<std::uint16_t> rest;
    for (std::size_t i = 0; i < s.pixels.size(); ++i)
        if (!region.bits[i]) rest.push_back(s.pixels[i]);
    require(!rest.empty(), ErrorKind::GeometryError, "region of '" + s.id + "' covers the whole image");
    const auto mid = rest.begin() + static_cast<std::ptrdiff_t>((rest.size() - 1) / 2);
    std::nth_element(rest.begin(), mid, rest.end());
    return *mid;
}

inline int param_int(const Json& params, const char* key, const std::string& where) {
    require(params.is_object() && params.contains(key) && params.at(key).is_number_integer(), ErrorKind::SchemaError,
            where + ": missing integer parameter '" + key + "'");
    return params.at(key).get<int>();
}

// Region given on the original grid, moved to the cropped grid.
inline Mask shift_region(const Mask& region, int dx, int dy, int w, int h) {
    Mask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sx = x + dx, sy = y + dy;
            if (sx < region.width && sy < region.height && region.at(sx, sy)) out.set(x, y);
        }
    return out;
}

}  // namespace detail

inline RemediationResult apply_remediation(const Dataset& input, const RemediationPlan& plan, const Fill& fill = {},
                                           unsigned workers = 1) {
    const auto& manifest = input.manifest;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) index[manifest.entries[i].id] = i;
    std::map<std::size_t, std::vector<std::size_t>> per_image;  // image -> action indices (plan order)
    for (std::size_t a = 0; a < plan.actions.size(); ++a) {
        const auto it = index.find(plan.actions[a].image_id);
        if (it == index.end()) fail(ErrorKind::UnknownImage, "plan references unknown image '" + plan.actions[a].image_id + "'");
        per_image[it->second].push_back(a);
    }

    std::vector<ImageSlice> images = input.images;
    std::vector<ManifestEntry> entries = manifest.entries;
    std::vector<char> excluded(images.size(), 0);
    std::vector<ProvenanceEntry> log(plan.actions.size());
    std::vector<std::size_t> touched;
    for (const auto& [i, acts] : per_image) touched.push_back(i);

    parallel_for(touched.size(), workers, [&](std::size_t t) {
        const std::size_t i = touched[t];
        ImageSlice& img = images[i];
        int off_x = 0, off_y = 0;
        for (auto a_idx : per_image.at(i)) {
            const auto& act = plan.actions[a_idx];
            const std::string where = "action on '" + act.image_id + "'";
            auto& e = log[a_idx];
            e = {a_idx, act.image_id, act.kind, act.action, act.findings, act.params, false, 0, summarize(img), {}};
            require(act.region.width == input.images[i].width && act.region.height == input.images[i].height,
                    ErrorKind::GeometryError, where + ": region dims do not match the image");
            switch (act.action) {
                case Action::Exclude:
                    excluded[i] = 1;
                    e.excluded = true;
                    break;
                case Action::Ignore:
                    break;
                case Action::Recalibrate: {
                    const double slope = act.params.at("slope").get<double>();
                    const double intercept = act.params.at("intercept").get<double>();
                    auto& meta = entries[i].calibration;
                    for (auto& p : img.pixels) {
                        const double physical = meta.slope * p + meta.intercept;
                        const auto v = static_cast<std::uint16_t>(
                            std::clamp(std::round((physical - intercept) / slope), 0.0, static_cast<double>(img.max_value)));
                        if (v != p) ++e.pixels_changed;
                        p = v;
                    }
                    meta.slope = slope;
                    meta.intercept = intercept;
                    break;
                }
                case Action::CropPadding: {
                    const int l = detail::param_int(act.params, "left", where), r = detail::param_int(act.params, "right", where);
                    const int tp = detail::param_int(act.params, "top", where), b = detail::param_int(act.params, "bottom", where);
                    require(off_x == 0 && off_y == 0 && img.width == input.images[i].width, ErrorKind::GeometryError,
                            where + ": image already cropped");
                    require(l >= 0 && r >= 0 && tp >= 0 && b >= 0, ErrorKind::GeometryError, where + ": negative crop");
                    const int w = img.width - l - r, h = img.height - tp - b;
                    require(w > 0 && h > 0, ErrorKind::GeometryError, where + ": crop would empty the image");
                    ImageSlice out{img.id, w, h, img.max_value, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h)};
                    for (int y = 0; y < h; ++y)
                        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(x + l, y + tp);
                    e.pixels_changed = img.pixels.size() - out.pixels.size();
                    img = std::move(out);
                    off_x = l;
                    off_y = tp;
                    break;
                }
                case Action::RemoveTableRows:
                case Action::MaskRegion: {
                    const Mask region = detail::shift_region(act.region, off_x, off_y, img.width, img.height);
                    const std::uint16_t v = fill.constant
                        ? static_cast<std::uint16_t>(std::min<double>(std::round(fill.value), img.max_value))
                        : detail::background_estimate(img, region);
                    for (std::size_t p = 0; p < img.pixels.size(); ++p)
                        if (region.bits[p] && img.pixels[p] != v) {
                            img.pixels[p] = v;
                            ++e.pixels_changed;
                        }
                    e.params["fill"] = v;
                    break;
                }
            }
            e.after = summarize(img);
        }
    });

    RemediationResult out;
    out.dataset.manifest.task = manifest.task;
    out.dataset.manifest.class_count = manifest.class_count;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (excluded[i]) continue;
        out.dataset.manifest.entries.push_back(entries[i]);
        out.dataset.images.push_back(std::move(images[i]));
    }
    out.log.entries = std::move(log);
    return out;
}

// ---------------------------------------------------------------------------
// Verify

inline constexpr double kFlaggedIncreaseTolerance = 0.02;

struct KindDelta {
    IssueKind kind = IssueKind::PaddingConfound;
    bool acted = false;
    double flagged_before = 0.0, flagged_after = 0.0;
    double severity_before = 0.0, severity_after = 0.0;
};

struct VerifyResult {
    std::vector<KindDelta> kinds;
    std::string verdict;  // improved | unchanged | regressed
};

// A kind counts as acted upon when it had flagged images before.
// Remediation changes the dataset id, so reports are comparable when they were
// produced under the same audit configuration.
inline VerifyResult verify_remediation(const AuditReport& before, const AuditReport& after) {
    require(before.version == after.version && before.config == after.config && before.s_flag == after.s_flag,
            ErrorKind::DatasetMismatch, "reports were produced under different audit configurations");
    VerifyResult r;
    bool increase = false, all_zero = true, any_acted = false, all_decreased = true;
    for (auto k : kAllIssueKinds) {
        const auto b = before.aggregates.count(k) ? before.aggregates.at(k) : KindAggregate{};
        const auto a = after.aggregates.count(k) ? after.aggregates.at(k) : KindAggregate{};
        KindDelta d{k, b.flagged_images > 0, b.flagged_fraction, a.flagged_fraction, b.mean_severity, a.mean_severity};
        if (d.flagged_after - d.flagged_before > kFlaggedIncreaseTolerance) increase = true;
        if (d.flagged_after != d.flagged_before || d.severity_after != d.severity_before) all_zero = false;
        if (d.acted) {
            any_acted = true;
            if (!(d.severity_after < d.severity_before)) all_decreased = false;
        }
        r.kinds.push_back(d);
    }
    if (increase) r.verdict = "regressed";
    else if (all_zero || !any_acted) r.verdict = "unchanged";
    else r.verdict = all_decreased ? "improved" : "regressed";
    return r;
}

inline Json to_json(const VerifyResult& r) {
    Json j;
    j["verdict"] = r.verdict;
    Json kinds = Json::object();
    for (const auto& d : r.kinds) {
        Json k;
        k["acted"] = d.acted;
        k["flagged_fraction_before"] = d.flagged_before;
        k["flagged_fraction_after"] = d.flagged_after;
        k["flagged_fraction_delta"] = d.flagged_after - d.flagged_before;
        k["mean_severity_before"] = d.severity_before;
        k["mean_severity_after"] = d.severity_after;
        k["mean_severity_delta"] = d.severity_after - d.severity_before;
        kinds[to_string(d.kind)] = std::move(k);
    }
    j["kinds"] = std::move(kinds);
    return j;
}

}  // namespace xaudit
