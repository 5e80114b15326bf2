#pragma once

// Region detectors for the audited issue classes. Detectors look only at the
// stored pixels; whether a region matters is decided later by attribution.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "xaudit/image.hpp"
#include "xaudit/issues.hpp"
#include "xaudit/json_util.hpp"

namespace xaudit {

struct DetectorConfig {
    int padding_min_width = 3;       // w_min
    double circle_k = 4.0;           // k_c: peak / median edge response
    double circle_thickness = 2.0;   // t_c
    double circle_min_support = 0.5; // fraction of the circle carrying the edge
    double circle_min_radius = 0.25; // radius search range, as a fraction of
    double table_band = 0.75;        // beta
    double table_k = 2.0;            // k_t
    int marker_min_size = 3;
    double marker_contrast = 2.0;    // |value - neighbour mean| / neighbour sd
    double range_violation = 0.01;   // p_v
    double dynamic_range_accuracy = 0.7;  // a_c
    double cluster_association = 0.3;     // Cramer's V / correlation ratio
};

struct RegionMask {
    IssueKind kind = IssueKind::PaddingConfound;
    Mask mask;
    Json params = Json::object();
};

// Axis-aligned sub-rectangle [x0, x1) x [y0, y1).
struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    static Rect of(const ImageSlice& s) { return {0, 0, s.width, s.height}; }
};

// ---------------------------------------------------------------------------
// Synthetic padding

struct PaddingWidths {
    int left = 0, right = 0, top = 0, bottom = 0;
};

namespace detail {

inline bool column_constant(const ImageSlice& s, int x, std::uint16_t v) {
    for (int y = 0; y < s.height; ++y)
        if (s.at(x, y) != v) return false;
    return true;
}

inline bool row_constant(const ImageSlice& s, int y, std::uint16_t v) {
    for (int x = 0; x < s.width; ++x)
        if (s.at(x, y) != v) return false;
    return true;
}

}  // namespace detail

inline PaddingWidths padding_widths(const ImageSlice& s, int w_min) {
    PaddingWidths p;
    auto run_cols = [&](int start, int step) {
        const auto v = s.at(start, 0);
        int n = 0;
        for (int x = start; x >= 0 && x < s.width && detail::column_constant(s, x, v); x += step) ++n;
        return n;
    };
    auto run_rows = [&](int start, int step) {
        const auto v = s.at(0, start);
        int n = 0;
        for (int y = start; y >= 0 && y < s.height && detail::row_constant(s, y, v); y += step) ++n;
        return n;
    };
    p.left = run_cols(0, 1);
    p.right = run_cols(s.width - 1, -1);
    p.top = run_rows(0, 1);
    p.bottom = run_rows(s.height - 1, -1);
    // A fully constant image has no content to pad.
    if (p.left >= s.width || p.top >= s.height) return {};
    if (p.left < w_min) p.left = 0;
    if (p.right < w_min) p.right = 0;
    if (p.top < w_min) p.top = 0;
    if (p.bottom < w_min) p.bottom = 0;
    if (p.left + p.right >= s.width || p.top + p.bottom >= s.height) return {};
    return p;
}

inline std::optional<RegionMask> detect_padding(const ImageSlice& s, const DetectorConfig& cfg = {}) {
    const auto p = padding_widths(s, cfg.padding_min_width);
    if (p.left + p.right + p.top + p.bottom == 0) return std::nullopt;
    RegionMask r{IssueKind::PaddingConfound, Mask(s.width, s.height), Json::object()};
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            if (x < p.left || x >= s.width - p.right || y < p.top || y >= s.height - p.bottom) r.mask.set(x, y);
    r.params["left"] = p.left;
    r.params["right"] = p.right;
    r.params["top"] = p.top;
    r.params["bottom"] = p.bottom;
    return r;
}

// Image area left after removing detected padding.
inline Rect content_rect(const ImageSlice& s, const DetectorConfig& cfg = {}) {
    const auto p = padding_widths(s, cfg.padding_min_width);
    return {p.left, p.top, s.width - p.right, s.height - p.bottom};
}

// ---------------------------------------------------------------------------
// Corner marker: a constant square anchored at a corner of the content area
// whose adjacent row and column segments mostly differ from it.

inline std::optional<RegionMask> detect_corner_marker(const ImageSlice& s, const DetectorConfig& cfg = {}) {
    const Rect area = content_rect(s, cfg);
    const int limit = std::min(area.width(), area.height()) / 2;
    RegionMask r{IssueKind::CornerMarker, Mask(s.width, s.height), Json::array()};
    for (int corner = 0; corner < 4; ++corner) {
        const int sx = (corner == 1 || corner == 3) ? -1 : 1;
        const int sy = (corner == 2 || corner == 3) ? -1 : 1;
        const int ox = sx > 0 ? area.x0 : area.x1 - 1;
        const int oy = sy > 0 ? area.y0 : area.y1 - 1;
        auto px = [&](int dx, int dy) { return s.at(ox + sx * dx, oy + sy * dy); };
        const auto v = px(0, 0);
        int size = 1;
        while (size < limit) {
            bool ok = true;
            for (int i = 0; i <= size && ok; ++i) ok = px(size, i) == v && px(i, size) == v;
            if (!ok) break;
            ++size;
        }
        if (size < cfg.marker_min_size || size >= limit) continue;
        int same = 0;
        for (int i = 0; i <= size; ++i) same += (px(size, i) == v) + (px(i, size) == v);
        if (2 * same >= 2 * (size + 1)) continue;  // not bounded: part of a larger flat area
        double nsum = 0.0, nsq = 0.0;
        for (int i = 0; i <= size; ++i)
            for (double a : {static_cast<double>(px(size, i)), static_cast<double>(px(i, size))}) {
                nsum += a;
                nsq += a * a;
            }
        const double nn = 2.0 * (size + 1);
        const double nmean = nsum / nn;
        const double nsd = std::sqrt(std::max(nsq / nn - nmean * nmean, 0.0));
        const double contrast = std::abs(v - nmean);
        if (!(contrast > cfg.marker_contrast * nsd)) continue;  // blends into its surroundings
        for (int dy = 0; dy < size; ++dy)
            for (int dx = 0; dx < size; ++dx) r.mask.set(ox + sx * dx, oy + sy * dy);
        Json sq;
        sq["corner"] = corner;
        sq["x"] = sx > 0 ? ox : ox - size + 1;
        sq["y"] = sy > 0 ? oy : oy - size + 1;
        sq["size"] = size;
        sq["value"] = v;
        sq["contrast"] = nsd > 0.0 ? contrast / nsd : contrast;
        r.params.push_back(std::move(sq));
    }
    if (r.params.empty()) return std::nullopt;
    Json wrapped;
    wrapped["squares"] = std::move(r.params);
    r.params = std::move(wrapped);
    return r;
}

// ---------------------------------------------------------------------------
// Field-of-view circle / ring

struct RadialProfile {
    std::vector<int> radii;
    std::vector<double> response;  // mean |radial gradient|
    std::vector<double> signed_mean;
    std::vector<double> support;
};

namespace detail {

inline double sample_bilinear(const ImageSlice& s, const Rect& area, double x, double y) {
    x = std::clamp(x, static_cast<double>(area.x0), static_cast<double>(area.x1 - 1));
    y = std::clamp(y, static_cast<double>(area.y0), static_cast<double>(area.y1 - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, area.x1 - 1), y1 = std::min(y0 + 1, area.y1 - 1);
    const double tx = x - x0, ty = y - y0;
    const double top = s.at(x0, y0) * (1 - tx) + s.at(x1, y0) * tx;
    const double bot = s.at(x0, y1) * (1 - tx) + s.at(x1, y1) * tx;
    return top * (1 - ty) + bot * ty;
}

}  // namespace detail

inline RadialProfile radial_profile(const ImageSlice& s, const Rect& area, int r_lo, int r_hi) {
    RadialProfile p;
    const double cx = (area.x0 + area.x1 - 1) / 2.0;
    const double cy = (area.y0 + area.y1 - 1) / 2.0;
    for (int r = r_lo; r <= r_hi; ++r) {
        const int n = std::max(32, static_cast<int>(std::ceil(2 * std::numbers::pi * r)));
        std::vector<double> g(static_cast<std::size_t>(n));
        double abs_sum = 0.0, sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double th = 2 * std::numbers::pi * j / n;
            const double ux = std::cos(th), uy = std::sin(th);
            const double outer = detail::sample_bilinear(s, area, cx + (r + 1) * ux, cy + (r + 1) * uy);
            const double inner = detail::sample_bilinear(s, area, cx + (r - 1) * ux, cy + (r - 1) * uy);
            g[static_cast<std::size_t>(j)] = (outer - inner) / 2.0;
            abs_sum += std::abs(g[static_cast<std::size_t>(j)]);
            sum += g[static_cast<std::size_t>(j)];
        }
        const double mean_abs = abs_sum / n;
        int supported = 0;
        for (double v : g) supported += std::abs(v) >= 0.5 * mean_abs && mean_abs > 0 ? 1 : 0;
        p.radii.push_back(r);
        p.response.push_back(mean_abs);
        p.signed_mean.push_back(sum / n);
        p.support.push_back(static_cast<double>(supported) / n);
    }
    return p;
}

inline std::optional<RegionMask> detect_fov_circle(const ImageSlice& s, const DetectorConfig& cfg = {}) {
    const Rect area{0, 0, s.width, s.height};
    const int m = std::min(area.width(), area.height());
    const int r_lo = std::max(2, static_cast<int>(std::lround(cfg.circle_min_radius * m)));
    const int r_hi = m / 2 - 2;
    if (r_hi - r_lo < 2) return std::nullopt;
    const auto prof = radial_profile(s, area, r_lo, r_hi);

    std::vector<double> sorted = prof.response;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const auto best_it = std::max_element(prof.response.begin(), prof.response.end());
    const auto best = static_cast<std::size_t>(best_it - prof.response.begin());
    const double peak = *best_it;
    if (!(peak > 0.0) || peak <= cfg.circle_k * median || prof.support[best] < cfg.circle_min_support) return std::nullopt;

    // A thin ring shows two opposite-signed edges; its radius is their midpoint.
    // A single edge (disk boundary) is taken as is.
    double radius = prof.radii[best];
    const int window = static_cast<int>(std::ceil(2 * cfg.circle_thickness)) + 2;
    std::size_t partner = prof.radii.size();
    for (std::size_t i = 0; i < prof.radii.size(); ++i) {
        const int d = std::abs(prof.radii[i] - prof.radii[best]);
        if (d < 2 || d > window) continue;
        if (prof.signed_mean[i] * prof.signed_mean[best] >= 0) continue;
        if (std::abs(prof.signed_mean[i]) < 0.5 * std::abs(prof.signed_mean[best])) continue;
        if (partner == prof.radii.size() || prof.response[i] > prof.response[partner]) partner = i;
    }
    if (partner != prof.radii.size()) {
        // Use the strongest radius on each side to locate both edges.
        auto strongest_near = [&](std::size_t centre) {
            std::size_t b = centre;
            for (std::size_t i = 0; i < prof.radii.size(); ++i)
                if (std::abs(prof.radii[i] - prof.radii[centre]) <= 1 && prof.signed_mean[i] * prof.signed_mean[centre] > 0 &&
                    prof.response[i] > prof.response[b])
                    b = i;
            return b;
        };
        const auto a = strongest_near(best), b = strongest_near(partner);
        // Centre of mass of each edge's two strongest bins.
        auto edge_pos = [&](std::size_t c) {
            double w = 0.0, acc = 0.0;
            for (std::size_t i = 0; i < prof.radii.size(); ++i)
                if (std::abs(prof.radii[i] - prof.radii[c]) <= 1 && prof.signed_mean[i] * prof.signed_mean[c] > 0) {
                    w += std::abs(prof.signed_mean[i]);
                    acc += std::abs(prof.signed_mean[i]) * prof.radii[i];
                }
            return w > 0 ? acc / w : static_cast<double>(prof.radii[c]);
        };
        radius = (edge_pos(a) + edge_pos(b)) / 2.0;
    }

    const double cx = (area.x0 + area.x1 - 1) / 2.0;
    const double cy = (area.y0 + area.y1 - 1) / 2.0;
    RegionMask r{IssueKind::CircularArtifact, Mask(s.width, s.height), Json::object()};
    for (int y = area.y0; y < area.y1; ++y)
        for (int x = area.x0; x < area.x1; ++x)
            if (std::abs(std::hypot(x - cx, y - cy) - radius) <= cfg.circle_thickness / 2) r.mask.set(x, y);
    if (r.mask.empty()) return std::nullopt;
    r.params["cx"] = cx;
    r.params["cy"] = cy;
    r.params["radius"] = radius;
    r.params["thickness"] = cfg.circle_thickness;
    r.params["response"] = peak;
    r.params["median_response"] = median;
    r.params["support"] = prof.support[best];
    return r;
}

// ---------------------------------------------------------------------------
// Patient table

inline std::optional<RegionMask> detect_table(const ImageSlice& s, const DetectorConfig& cfg = {}) {
    double mean = 0.0;
    for (auto v : s.pixels) mean += v;
    mean /= static_cast<double>(s.pixels.size());
    double var = 0.0;
    for (auto v : s.pixels) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(s.pixels.size()));
    if (!(sd > 0.0)) return std::nullopt;
    const double threshold = mean + cfg.table_k * sd;
    const int band_start = static_cast<int>(std::ceil(cfg.table_band * s.height));

    RegionMask r{IssueKind::PatientTable, Mask(s.width, s.height), Json::object()};
    Json runs = Json::array();
    int run_start = -1;
    for (int y = band_start; y <= s.height; ++y) {
        bool bright = false;
        if (y < s.height) {
            double row = 0.0;
            for (int x = 0; x < s.width; ++x) row += s.at(x, y);
            bright = row / s.width > threshold;
        }
        if (bright && run_start < 0) run_start = y;
        if (!bright && run_start >= 0) {
            runs.push_back(Json::array({run_start, y}));
            for (int yy = run_start; yy < y; ++yy)
                for (int x = 0; x < s.width; ++x) r.mask.set(x, yy);
            run_start = -1;
        }
    }
    if (runs.empty()) return std::nullopt;
    r.params["rows"] = std::move(runs);  // [start, end) pairs
    r.params["band_start"] = band_start;
    r.params["threshold"] = threshold;
    return r;
}

}  // namespace xaudit
