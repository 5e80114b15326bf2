#pragma once

// Quantitative explainability on the prototype: occlusion sensitivity,
// gradient x input saliency, and a greedy critical-subset search that stands
// in for GSInquire (whose internals are not public). All three operate in
// model space (the normalized input_size x input_size plane).
//
// Scores used by occlusion: for classification the log-probability of the
// target class, for regression the scalar output. Critical-subset search uses
// confidence instead: the target-class probability, or for regression the
// negated absolute deviation from the unoccluded prediction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xaudit/binio.hpp"
#include "xaudit/model.hpp"
#include "xaudit/parallel.hpp"

namespace xaudit {

enum class AttributionMethod { Occlusion, GradInput, CriticalSubset };

inline std::string to_string(AttributionMethod m) {
    switch (m) {
        case AttributionMethod::Occlusion: return "occlusion";
        case AttributionMethod::GradInput: return "grad_input";
        case AttributionMethod::CriticalSubset: return "critical_subset";
    }
    return "?";
}

inline AttributionMethod parse_attribution_method(const std::string& s) {
    if (s == "occlusion") return AttributionMethod::Occlusion;
    if (s == "grad_input") return AttributionMethod::GradInput;
    if (s == "critical_subset") return AttributionMethod::CriticalSubset;
    fail(ErrorKind::ConfigError, "unknown attribution method '" + s + "'");
}

inline constexpr int kRegressionTarget = -1;

struct AttributionMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // non-negative, finite
    AttributionMethod method = AttributionMethod::Occlusion;
    std::string image_id;
    int target = kRegressionTarget;

    double total() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

enum class Baseline { Zero, DatasetMean, LocalMean };

inline std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::Zero: return "zero";
        case Baseline::DatasetMean: return "dataset_mean";
        case Baseline::LocalMean: return "local_mean";
    }
    return "?";
}

inline Baseline parse_baseline(const std::string& s) {
    if (s == "zero") return Baseline::Zero;
    if (s == "dataset_mean") return Baseline::DatasetMean;
    if (s == "local_mean") return Baseline::LocalMean;
    fail(ErrorKind::ConfigError, "unknown occlusion baseline '" + s + "'");
}

struct OcclusionConfig {
    int patch = 8;
    int stride = 4;
    Baseline baseline = Baseline::DatasetMean;
};

inline void validate(const OcclusionConfig& c) {
    require(c.patch >= 1, ErrorKind::ConfigError, "occlusion patch must be positive");
    require(c.stride >= 1 && c.stride <= c.patch, ErrorKind::ConfigError, "occlusion stride must be in [1, patch]");
}

// Score of the target under the model for a model-space input.
class TargetScorer {
public:
    TargetScorer(const PrototypeModel& model, int target)
        : model_(model), layout_(compute_layout(model.arch)), target_(target) {
        if (model.arch.head == Head::Softmax)
            require(target >= 0 && target < model.arch.class_count, ErrorKind::InvalidArgument, "target class out of range");
    }

    // log p_target (classification) or output (regression)
    double score(std::span<const double> input) const {
        auto out = forward_outputs(layout_, model_.weights, input);
        if (model_.arch.head == Head::LinearScalar) return out[0];
        return log_softmax(out)[static_cast<std::size_t>(target_)];
    }

    // p_target (classification) or output (regression)
    double value(std::span<const double> input) const {
        auto out = forward_outputs(layout_, model_.weights, input);
        if (model_.arch.head == Head::LinearScalar) return out[0];
        return softmax(out)[static_cast<std::size_t>(target_)];
    }

    int target() const { return target_; }
    bool regression() const { return model_.arch.head == Head::LinearScalar; }

private:
    const PrototypeModel& model_;
    Layout layout_;
    int target_;
};

// Default explanation target: predicted class, or the regression marker.
inline int default_target(const PrototypeModel& model, const Plane& input) {
    if (model.arch.head == Head::LinearScalar) return kRegressionTarget;
    return forward(model, input).predicted_class;
}

// Patch origins along one axis: 0, stride, 2*stride, ... plus a final origin
// flush with the far edge so every pixel is covered.
inline std::vector<int> patch_origins(int extent, int patch, int stride) {
    std::vector<int> out;
    const int p = std::min(patch, extent);
    for (int o = 0; o + p <= extent; o += stride) out.push_back(o);
    if (out.empty() || out.back() + p < extent) out.push_back(extent - p);
    return out;
}

inline AttributionMap occlusion_map(const PrototypeModel& model, const Plane& input, const OcclusionConfig& cfg, int target,
                                    const Plane* dataset_mean = nullptr, unsigned workers = 1) {
    validate(cfg);
    require(input.width == model.arch.input_size && input.height == model.arch.input_size, ErrorKind::ShapeMismatch,
            "input dims do not match model");
    if (cfg.baseline == Baseline::DatasetMean)
        require(dataset_mean && dataset_mean->width == input.width && dataset_mean->height == input.height,
                ErrorKind::ConfigError, "dataset_mean baseline needs a mean plane of the input dims");
    const TargetScorer scorer(model, target);
    const double base_score = scorer.score(input.values);

    const int W = input.width, H = input.height;
    const int pw = std::min(cfg.patch, W), ph = std::min(cfg.patch, H);
    const auto xs = patch_origins(W, cfg.patch, cfg.stride);
    const auto ys = patch_origins(H, cfg.patch, cfg.stride);
    const std::size_t n_patches = xs.size() * ys.size();

    std::vector<double> drops(n_patches);
    parallel_for(n_patches, workers, [&](std::size_t idx) {
        const int x0 = xs[idx % xs.size()];
        const int y0 = ys[idx / xs.size()];
        Plane occluded = input;
        double local = 0.0;
        if (cfg.baseline == Baseline::LocalMean) {
            for (int y = y0; y < y0 + ph; ++y)
                for (int x = x0; x < x0 + pw; ++x) local += input.at(x, y);
            local /= static_cast<double>(pw * ph);
        }
        for (int y = y0; y < y0 + ph; ++y)
            for (int x = x0; x < x0 + pw; ++x) {
                double b = 0.0;
                if (cfg.baseline == Baseline::DatasetMean) b = dataset_mean->at(x, y);
                else if (cfg.baseline == Baseline::LocalMean) b = local;
                occluded.at(x, y) = b;
            }
        drops[idx] = std::max(base_score - scorer.score(occluded.values), 0.0);
    });

    std::vector<double> sum(input.size(), 0.0);
    std::vector<int> cover(input.size(), 0);
    for (std::size_t idx = 0; idx < n_patches; ++idx) {
        const int x0 = xs[idx % xs.size()];
        const int y0 = ys[idx / xs.size()];
        for (int y = y0; y < y0 + ph; ++y)
            for (int x = x0; x < x0 + pw; ++x) {
                const auto i = static_cast<std::size_t>(y) * W + x;
                sum[i] += drops[idx];
                cover[i] += 1;
            }
    }
    AttributionMap map{W, H, std::vector<double>(input.size()), AttributionMethod::Occlusion, {}, target};
    for (std::size_t i = 0; i < sum.size(); ++i) {
        const double v = cover[i] ? sum[i] / cover[i] : 0.0;
        map.values[i] = std::isfinite(v) ? v : 0.0;
    }
    return map;
}

// |d f_target / d x  (.)  x| per pixel.
inline AttributionMap saliency_map(const PrototypeModel& model, const Plane& input, int target) {
    const Plane g = grad_input(model, input, target);
    AttributionMap map{input.width, input.height, std::vector<double>(input.size()), AttributionMethod::GradInput, {}, target};
    for (std::size_t i = 0; i < input.size(); ++i) map.values[i] = std::abs(g.values[i] * input.values[i]);
    return map;
}

// ---------------------------------------------------------------------------
// Greedy critical subset

struct GridCell {
    int row = 0;
    int col = 0;
    int size = 0;

    friend bool operator==(const GridCell&, const GridCell&) = default;
    friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

struct CriticalSet {
    std::vector<GridCell> patches;
    double resulting_confidence = 0.0;
    double original_confidence = 0.0;
};

struct NotReachable {
    double original_confidence = 0.0;
    double best_confidence = 0.0;  // with every cell occluded
};

using CriticalOutcome = std::variant<CriticalSet, NotReachable>;

// Confidence bookkeeping shared by the greedy search and its checks.
class ConfidenceProbe {
public:
    ConfidenceProbe(const PrototypeModel& model, const Plane& input, int cell, double gamma, const Plane& baseline)
        : scorer_(model, default_target(model, input)), input_(input), baseline_(baseline), cell_(cell), gamma_(gamma) {
        require(cell >= 1 && input.width % cell == 0 && input.height % cell == 0, ErrorKind::InvalidArgument,
                "grid_size must divide the image side");
        require(gamma > 0.0 && gamma < 1.0, ErrorKind::InvalidArgument, "drop threshold must lie in (0, 1)");
        require(baseline.width == input.width && baseline.height == input.height, ErrorKind::ShapeMismatch,
                "baseline dims do not match input");
        original_value_ = scorer_.value(input.values);
    }

    int rows() const { return input_.height / cell_; }
    int cols() const { return input_.width / cell_; }
    std::size_t cell_count() const { return static_cast<std::size_t>(rows()) * cols(); }
    GridCell cell(std::size_t idx) const {
        return {static_cast<int>(idx) / cols(), static_cast<int>(idx) % cols(), cell_};
    }

    // Confidence with the listed cells occluded.
    double confidence(std::span<const std::size_t> cells) const {
        Plane x = input_;
        for (auto idx : cells) {
            const auto c = cell(idx);
            for (int y = c.row * cell_; y < (c.row + 1) * cell_; ++y)
                for (int xx = c.col * cell_; xx < (c.col + 1) * cell_; ++xx) x.at(xx, y) = baseline_.at(xx, y);
        }
        const double v = scorer_.value(x.values);
        return scorer_.regression() ? -std::abs(v - original_value_) : v;
    }

    double original_confidence() const { return scorer_.regression() ? 0.0 : original_value_; }

    bool reached(double conf) const {
        if (scorer_.regression()) return -conf > (1.0 - gamma_) * std::abs(original_value_);
        return conf <= gamma_ * original_value_;
    }

private:
    TargetScorer scorer_;
    const Plane& input_;
    const Plane& baseline_;
    int cell_;
    double gamma_;
    double original_value_ = 0.0;
};

inline CriticalOutcome critical_factors(const PrototypeModel& model, const Plane& input, int grid_size, double gamma,
                                        const Plane& baseline, unsigned workers = 1) {
    const ConfidenceProbe probe(model, input, grid_size, gamma, baseline);
    const std::size_t n = probe.cell_count();
    std::vector<std::size_t> selected;
    std::vector<char> used(n, 0);
    double conf = probe.original_confidence();

    while (!probe.reached(conf) && selected.size() < n) {
        std::vector<double> trial(n, std::numeric_limits<double>::infinity());
        parallel_for(n, workers, [&](std::size_t c) {
            if (used[c]) return;
            auto cells = selected;
            cells.push_back(c);
            trial[c] = probe.confidence(cells);
        });
        std::size_t best = n;
        for (std::size_t c = 0; c < n; ++c)
            if (!used[c] && (best == n || trial[c] < trial[best])) best = c;
        selected.push_back(best);
        used[best] = 1;
        conf = trial[best];
    }
    if (!probe.reached(conf)) return NotReachable{probe.original_confidence(), conf};

    // Backward pass: drop members whose restoration keeps the threshold met,
    // repeated until every remaining member is necessary.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < selected.size(); ++i) {
            auto without = selected;
            without.erase(without.begin() + static_cast<std::ptrdiff_t>(i));
            if (without.empty()) continue;
            const double c = probe.confidence(without);
            if (probe.reached(c)) {
                selected = std::move(without);
                conf = c;
                changed = true;
                break;
            }
        }
    }

    CriticalSet set;
    std::sort(selected.begin(), selected.end());
    for (auto idx : selected) set.patches.push_back(probe.cell(idx));
    set.resulting_confidence = probe.confidence(selected);
    set.original_confidence = probe.original_confidence();
    return set;
}

inline AttributionMap critical_set_map(const CriticalSet& set, int width, int height, int target) {
    AttributionMap map{width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0),
                       AttributionMethod::CriticalSubset, {}, target};
    for (const auto& c : set.patches)
        for (int y = c.row * c.size; y < (c.row + 1) * c.size; ++y)
            for (int x = c.col * c.size; x < (c.col + 1) * c.size; ++x) map.values[static_cast<std::size_t>(y) * width + x] = 1.0;
    return map;
}

// ---------------------------------------------------------------------------
// Map post-processing

// Pixels whose value is >= the q-quantile of the positive values. The
// quantile is the element at index floor(q * n) of the sorted positives.
inline Mask binarize(const AttributionMap& map, double q) {
    require(q > 0.0 && q < 1.0, ErrorKind::InvalidArgument, "quantile must lie in (0, 1)");
    Mask mask(map.width, map.height);
    std::vector<double> pos;
    for (double v : map.values)
        if (v > 0.0) pos.push_back(v);
    if (pos.empty()) return mask;
    std::sort(pos.begin(), pos.end());
    const auto idx = std::min(pos.size() - 1, static_cast<std::size_t>(std::floor(q * static_cast<double>(pos.size()) + 1e-9)));
    const double threshold = pos[idx];
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (map.values[i] > 0.0 && map.values[i] >= threshold) mask.bits[i] = 1;
    return mask;
}

inline double mass_fraction(const AttributionMap& map, const Mask& region) {
    require(map.width == region.width && map.height == region.height, ErrorKind::ShapeMismatch,
            "region dims do not match attribution map");
    double total = 0.0, inside = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        total += map.values[i];
        if (region.bits[i]) inside += map.values[i];
    }
    require(total > 0.0, ErrorKind::ZeroMass, "attribution map '" + map.image_id + "' has zero total mass");
    return std::clamp(inside / total, 0.0, 1.0);
}

// Mean of model-space inputs, the dataset_mean occlusion baseline.
inline Plane mean_plane(std::span<const Plane> inputs) {
    require(!inputs.empty(), ErrorKind::EmptyDataset, "mean of no planes");
    Plane m(inputs[0].width, inputs[0].height);
    for (const auto& p : inputs) {
        require(p.width == m.width && p.height == m.height, ErrorKind::ShapeMismatch, "planes differ in dims");
        for (std::size_t i = 0; i < p.size(); ++i) m.values[i] += p.values[i];
    }
    for (auto& v : m.values) v /= static_cast<double>(inputs.size());
    return m;
}

// Brings a model-space map back to the source image grid.
inline AttributionMap to_image_grid(AttributionMap map, int width, int height) {
    if (map.width == width && map.height == height) return map;
    Plane p(map.width, map.height);
    p.values = std::move(map.values);
    Plane r = resample_bilinear(p, width, height);
    for (auto& v : r.values) v = std::max(v, 0.0);
    map.width = width;
    map.height = height;
    map.values = std::move(r.values);
    return map;
}

// ---------------------------------------------------------------------------
// Serialization
//
//   "XAUDATTR", u32 version (1), u8 method, str image_id (u32 length + bytes),
//   i32 target (-1 regression), u32 width, u32 height, width*height f32.

inline constexpr std::string_view kAttributionMagic = "XAUDATTR";

inline std::vector<std::uint8_t> write_attribution(const AttributionMap& map) {
    ByteWriter w;
    w.bytes(kAttributionMagic.data(), kAttributionMagic.size());
    w.u32(1);
    w.u8(static_cast<std::uint8_t>(map.method));
    w.str(map.image_id);
    w.i32(map.target);
    w.u32(static_cast<std::uint32_t>(map.width));
    w.u32(static_cast<std::uint32_t>(map.height));
    for (double v : map.values) w.f32(static_cast<float>(v));
    return w.take();
}

inline AttributionMap read_attribution(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "attribution map");
    r.expect(kAttributionMagic);
    require(r.u32() == 1, ErrorKind::BadMagic, "unsupported attribution map version");
    AttributionMap m;
    const auto method = r.u8();
    require(method <= 2, ErrorKind::SchemaError, "unknown attribution method");
    m.method = static_cast<AttributionMethod>(method);
    m.image_id = r.str();
    m.target = r.i32();
    m.width = static_cast<int>(r.u32());
    m.height = static_cast<int>(r.u32());
    m.values.resize(static_cast<std::size_t>(m.width) * m.height);
    for (auto& v : m.values) v = r.f32();
    require(r.at_end(), ErrorKind::SchemaError, "trailing bytes after attribution map");
    return m;
}

// 8-bit preview scaled so the maximum maps to 255.
inline ImageSlice attribution_preview(const AttributionMap& map) {
    ImageSlice s{map.image_id, map.width, map.height, 255, std::vector<std::uint16_t>(map.values.size(), 0)};
    const double mx = map.values.empty() ? 0.0 : *std::max_element(map.values.begin(), map.values.end());
    if (mx > 0.0)
        for (std::size_t i = 0; i < map.values.size(); ++i)
            s.pixels[i] = static_cast<std::uint16_t>(std::lround(255.0 * map.values[i] / mx));
    return s;
}

}  // namespace xaudit
