#pragma once

// Dataset-level calibration audit. Three independent tests:
//   (a) (slope, intercept) clusters associated with the label,
//   (b) calibrated values outside the declared range,
//   (c) raw dynamic range predicting the label under a held-out rule.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/detectors.hpp"

namespace xaudit {

inline constexpr std::size_t kMinCalibrationImages = 10;

struct CalibrationAudit {
    std::size_t image_count = 0;
    bool insufficient_data = false;

    // (a)
    std::vector<int> cluster_of;  // per image
    std::vector<CalibrationMeta> clusters;
    int reference_cluster = 0;
    double association = 0.0;
    std::string association_statistic;
    bool metadata_inconsistent = false;

    // (b)
    std::vector<double> violation_fraction;  // per image; 0 without declared range
    std::vector<std::size_t> range_flagged;

    // (c)
    double balanced_accuracy = 0.0;
    std::string best_statistic;
    bool dynamic_range_predictive = false;

    std::vector<std::size_t> cluster_flagged;
    std::vector<std::size_t> flagged;  // union of (a) and (b), ascending
};

namespace detail {

inline bool same_calibration(const CalibrationMeta& a, const CalibrationMeta& b) {
    auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)); };
    return close(a.slope, b.slope) && close(a.intercept, b.intercept);
}

// Cramer's V between two categorical variables.
inline double cramers_v(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<int, int> ai, bi;
    for (int v : a) ai.emplace(v, 0);
    for (int v : b) bi.emplace(v, 0);
    int k = 0;
    for (auto& [v, idx] : ai) idx = k++;
    k = 0;
    for (auto& [v, idx] : bi) idx = k++;
    const std::size_t r = ai.size(), c = bi.size();
    if (r < 2 || c < 2) return 0.0;
    std::vector<double> table(r * c, 0.0), rs(r, 0.0), cs(c, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = static_cast<std::size_t>(ai[a[i]]), y = static_cast<std::size_t>(bi[b[i]]);
        table[x * c + y] += 1;
        rs[x] += 1;
        cs[y] += 1;
    }
    const double n = static_cast<double>(a.size());
    double chi2 = 0.0;
    for (std::size_t x = 0; x < r; ++x)
        for (std::size_t y = 0; y < c; ++y) {
            const double e = rs[x] * cs[y] / n;
            chi2 += (table[x * c + y] - e) * (table[x * c + y] - e) / e;
        }
    return std::sqrt(chi2 / (n * static_cast<double>(std::min(r, c) - 1)));
}

// Correlation ratio eta between a categorical group and a real value.
inline double correlation_ratio(const std::vector<int>& group, const std::vector<double>& y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc[group[i]].first += y[i];
        acc[group[i]].second += 1;
    }
    double between = 0.0, total = 0.0;
    for (const auto& [g, s] : acc) {
        const double m = s.first / s.second;
        between += s.second * (m - mean) * (m - mean);
    }
    for (double v : y) total += (v - mean) * (v - mean);
    return total > 0.0 ? std::sqrt(between / total) : 0.0;
}

// Nearest-rank percentile on a sorted vector.
inline double sorted_percentile(const std::vector<double>& sorted, double p) {
    const auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
}

// Two-fold nearest-centroid rule on a scalar feature, folds alternating
// within each class; pooled held-out predictions scored by balanced accuracy.
inline double heldout_balanced_accuracy(const std::vector<double>& x, const std::vector<int>& y) {
    const std::size_t n = x.size();
    std::vector<std::size_t> fold_of(n);
    std::map<int, std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) fold_of[i] = seen[y[i]]++ % 2;
    std::vector<int> pred(n, -1);
    for (std::size_t fold = 0; fold < 2; ++fold) {
        std::map<int, std::pair<double, int>> centroid;
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of[i] != fold) {
                centroid[y[i]].first += x[i];
                centroid[y[i]].second += 1;
            }
        if (centroid.empty()) continue;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] != fold) continue;
            double best = 0.0;
            int best_class = -1;
            for (const auto& [cls, s] : centroid) {
                const double d = std::abs(x[i] - s.first / s.second);
                if (best_class < 0 || d < best) {
                    best = d;
                    best_class = cls;
                }
            }
            pred[i] = best_class;
        }
    }
    std::map<int, std::pair<int, int>> recall;  // class -> (hits, total)
    for (std::size_t i = 0; i < n; ++i) {
        recall[y[i]].second += 1;
        if (pred[i] == y[i]) recall[y[i]].first += 1;
    }
    if (recall.size() < 2) return 0.0;
    double sum = 0.0;
    for (const auto& [cls, r] : recall) sum += static_cast<double>(r.first) / r.second;
    return sum / static_cast<double>(recall.size());
}

}  // namespace detail

inline CalibrationAudit detect_calibration_anomaly(const DatasetManifest& manifest, const std::vector<ImageSlice>& images,
                                                   const DetectorConfig& cfg = {}) {
    require(images.size() == manifest.entries.size(), ErrorKind::InvalidArgument, "manifest/image count mismatch");
    CalibrationAudit out;
    const std::size_t n = images.size();
    out.image_count = n;
    out.violation_fraction.assign(n, 0.0);

    // (b) runs per image regardless of dataset size.
    for (std::size_t i = 0; i < n; ++i) {
        const auto& meta = manifest.entries[i].calibration;
        if (!meta.declared_range) continue;
        const auto [lo, hi] = *meta.declared_range;
        std::size_t outside = 0;
        for (auto p : images[i].pixels) {
            const double v = meta.slope * p + meta.intercept;
            if (v < lo || v > hi) ++outside;
        }
        out.violation_fraction[i] = static_cast<double>(outside) / static_cast<double>(images[i].pixels.size());
        if (out.violation_fraction[i] > cfg.range_violation) out.range_flagged.push_back(i);
    }

    out.cluster_of.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& meta = manifest.entries[i].calibration;
        auto it = std::find_if(out.clusters.begin(), out.clusters.end(),
                               [&](const CalibrationMeta& c) { return detail::same_calibration(meta, c); });
        if (it == out.clusters.end()) {
            out.clusters.push_back(meta);
            it = out.clusters.end() - 1;
        }
        out.cluster_of[i] = static_cast<int>(it - out.clusters.begin());
    }

    if (n < kMinCalibrationImages) {
        out.insufficient_data = true;
        out.flagged = out.range_flagged;
        return out;
    }

    const bool cls = manifest.task == Task::Classification;
    std::vector<int> label_class(n);
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = manifest.entries[i].label;
    if (cls) {
        for (std::size_t i = 0; i < n; ++i) label_class[i] = manifest.class_of(i);
    } else {
        std::vector<double> sorted = labels;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[(n - 1) / 2];
        for (std::size_t i = 0; i < n; ++i) label_class[i] = labels[i] > median ? 1 : 0;
    }

    // (a)
    if (out.clusters.size() > 1) {
        if (cls) {
            out.association = detail::cramers_v(out.cluster_of, label_class);
            out.association_statistic = "cramers_v";
        } else {
            out.association = detail::correlation_ratio(out.cluster_of, labels);
            out.association_statistic = "correlation_ratio";
        }
        out.metadata_inconsistent = out.association >= cfg.cluster_association;
        std::vector<std::size_t> sizes(out.clusters.size(), 0);
        for (int c : out.cluster_of) ++sizes[static_cast<std::size_t>(c)];
        // Identity calibration if present, else the largest cluster (first
        // appearance wins ties).
        out.reference_cluster = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        for (std::size_t c = 0; c < out.clusters.size(); ++c)
            if (detail::same_calibration(out.clusters[c], CalibrationMeta{})) out.reference_cluster = static_cast<int>(c);
        if (out.metadata_inconsistent)
            for (std::size_t i = 0; i < n; ++i)
                if (out.cluster_of[i] != out.reference_cluster) out.cluster_flagged.push_back(i);
    }

    // (c)
    std::vector<double> mean(n), p5(n), p95(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(images[i].pixels.begin(), images[i].pixels.end());
        double s = 0.0;
        for (double x : v) s += x;
        mean[i] = s / static_cast<double>(v.size());
        std::sort(v.begin(), v.end());
        p5[i] = detail::sorted_percentile(v, 0.05);
        p95[i] = detail::sorted_percentile(v, 0.95);
    }
    const std::pair<const char*, const std::vector<double>*> stats[] = {{"mean", &mean}, {"p5", &p5}, {"p95", &p95}};
    for (const auto& [name, values] : stats) {
        const double acc = detail::heldout_balanced_accuracy(*values, label_class);
        if (acc > out.balanced_accuracy || out.best_statistic.empty()) {
            out.balanced_accuracy = acc;
            out.best_statistic = name;
        }
    }
    out.dynamic_range_predictive = out.balanced_accuracy >= cfg.dynamic_range_accuracy;

    std::vector<std::size_t> all = out.cluster_flagged;
    all.insert(all.end(), out.range_flagged.begin(), out.range_flagged.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    out.flagged = std::move(all);
    return out;
}

inline Json to_json(const CalibrationAudit& a, const DatasetManifest& manifest) {
    auto ids = [&](const std::vector<std::size_t>& idx) {
        Json arr = Json::array();
        for (auto i : idx) arr.push_back(manifest.entries[i].id);
        return arr;
    };
    Json j;
    j["insufficient_data"] = a.insufficient_data;
    Json clusters = Json::array();
    for (const auto& c : a.clusters) clusters.push_back(Json::array({c.slope, c.intercept}));
    Json meta;
    meta["clusters"] = std::move(clusters);
    meta["reference_cluster"] = a.reference_cluster;
    meta["statistic"] = a.association_statistic.empty() ? Json(nullptr) : Json(a.association_statistic);
    meta["association"] = a.association;
    meta["inconsistent"] = a.metadata_inconsistent;
    meta["flagged"] = ids(a.cluster_flagged);
    j["metadata"] = std::move(meta);
    Json range;
    range["flagged"] = ids(a.range_flagged);
    j["range_violation"] = std::move(range);
    Json dyn;
    dyn["balanced_accuracy"] = a.balanced_accuracy;
    dyn["statistic"] = a.best_statistic.empty() ? Json(nullptr) : Json(a.best_statistic);
    dyn["predictive"] = a.dynamic_range_predictive;
    j["dynamic_range"] = std::move(dyn);
    j["flagged"] = ids(a.flagged);
    return j;
}

}  // namespace xaudit
