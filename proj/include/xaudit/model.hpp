#pragma once

// The dummy CNN prototype: conv stages (zero "same" padding, ReLU, optional
// 2x2 max-pool), an optional ReLU dense layer, and a softmax or scalar head.
// Double precision throughout.
//
// Weight layout (flat, in this order):
//   for each conv stage:  W[filters][in_channels][k][k], then b[filters]
//   hidden dense (if any): W[hidden][flat_in], then b[hidden]
//   head:                  W[outputs][prev], then b[outputs]
// where flat_in is the last stage output in [channel][row][col] order and
// outputs is class_count (softmax) or 1 (linear scalar).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/image.hpp"
#include "xaudit/rng.hpp"

namespace xaudit {

struct ConvSpec {
    int filters = 8;
    int kernel = 3;
    int stride = 1;
    bool pool = true;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

enum class Head { Softmax, LinearScalar };

struct ArchSpec {
    int input_size = 64;
    std::vector<ConvSpec> conv_layers;
    int hidden_units = 32;  // 0 = no hidden layer
    Head head = Head::Softmax;
    int class_count = 2;    // softmax head only

    int outputs() const { return head == Head::Softmax ? class_count : 1; }

    // 2 conv stages (8 and 16 filters, 3x3, stride 1, ReLU + 2x2 max-pool),
    // 32 hidden ReLU units, task head.
    static ArchSpec default_for(int input_size, Task task, int class_count = 2) {
        ArchSpec a;
        a.input_size = input_size;
        a.conv_layers = {{8, 3, 1, true}, {16, 3, 1, true}};
        a.hidden_units = 32;
        a.head = task == Task::Classification ? Head::Softmax : Head::LinearScalar;
        a.class_count = task == Task::Classification ? class_count : 1;
        return a;
    }

    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

enum class Normalization { PerImageZscore, GlobalMinmax, Raw };

inline std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::PerImageZscore: return "per_image_zscore";
        case Normalization::GlobalMinmax: return "global_minmax";
        case Normalization::Raw: return "raw";
    }
    return "?";
}

inline Normalization parse_normalization(const std::string& s) {
    if (s == "per_image_zscore") return Normalization::PerImageZscore;
    if (s == "global_minmax") return Normalization::GlobalMinmax;
    if (s == "raw") return Normalization::Raw;
    fail(ErrorKind::ConfigError, "unknown normalization '" + s + "'");
}

// How images become model inputs. lo/hi are the dataset range fitted at
// training time for global_minmax.
struct InputSpec {
    Normalization normalization = Normalization::PerImageZscore;
    bool use_calibration = false;
    double lo = 0.0;
    double hi = 1.0;

    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct PrototypeModel {
    ArchSpec arch;
    InputSpec input;
    std::uint64_t seed = 0;
    std::vector<double> weights;

    friend bool operator==(const PrototypeModel&, const PrototypeModel&) = default;
};

struct Prediction {
    std::vector<double> logits;         // classification only
    std::vector<double> probabilities;  // classification only
    double value = 0.0;                 // regression only
    double confidence = 1.0;
    int predicted_class = -1;
};

// ---------------------------------------------------------------------------
// Layout

struct ConvGeom {
    int in_c, in_h, in_w;
    int filters, k, stride, pad;
    int out_h, out_w;
    bool pool;
    int pool_h, pool_w;
    std::size_t w_off, b_off;

    int stage_h() const { return pool ? pool_h : out_h; }
    int stage_w() const { return pool ? pool_w : out_w; }
    std::size_t conv_size() const { return static_cast<std::size_t>(filters) * out_h * out_w; }
    std::size_t stage_size() const { return static_cast<std::size_t>(filters) * stage_h() * stage_w(); }
};

struct DenseGeom {
    int in, out;
    std::size_t w_off, b_off;
};

struct Layout {
    std::vector<ConvGeom> convs;
    std::optional<DenseGeom> hidden;
    DenseGeom head{};
    std::size_t weight_count = 0;
    int input_size = 0;
};

inline Layout compute_layout(const ArchSpec& arch) {
    require(arch.input_size >= 1, ErrorKind::ArchError, "input_size must be positive");
    require(arch.hidden_units >= 0, ErrorKind::ArchError, "hidden_units must be non-negative");
    if (arch.head == Head::Softmax) require(arch.class_count >= 2, ErrorKind::ArchError, "softmax head needs class_count >= 2");
    Layout L;
    L.input_size = arch.input_size;
    int c = 1, h = arch.input_size, w = arch.input_size;
    std::size_t off = 0;
    for (std::size_t i = 0; i < arch.conv_layers.size(); ++i) {
        const auto& s = arch.conv_layers[i];
        const std::string where = "conv layer " + std::to_string(i);
        require(s.filters >= 1, ErrorKind::ArchError, where + ": filters must be positive");
        require(s.kernel >= 1 && s.kernel % 2 == 1, ErrorKind::ArchError, where + ": kernel must be a positive odd integer");
        require(s.stride >= 1, ErrorKind::ArchError, where + ": stride must be positive");
        ConvGeom g{};
        g.in_c = c;
        g.in_h = h;
        g.in_w = w;
        g.filters = s.filters;
        g.k = s.kernel;
        g.stride = s.stride;
        g.pad = s.kernel / 2;
        g.out_h = (h - 1) / s.stride + 1;
        g.out_w = (w - 1) / s.stride + 1;
        g.pool = s.pool;
        g.pool_h = g.out_h / 2;
        g.pool_w = g.out_w / 2;
        require(g.stage_h() >= 1 && g.stage_w() >= 1, ErrorKind::ArchError, where + ": spatial size reduced below 1");
        g.w_off = off;
        off += static_cast<std::size_t>(g.filters) * g.in_c * g.k * g.k;
        g.b_off = off;
        off += static_cast<std::size_t>(g.filters);
        L.convs.push_back(g);
        c = g.filters;
        h = g.stage_h();
        w = g.stage_w();
    }
    int flat = c * h * w;
    if (arch.hidden_units > 0) {
        DenseGeom d{flat, arch.hidden_units, off, 0};
        off += static_cast<std::size_t>(d.in) * d.out;
        d.b_off = off;
        off += static_cast<std::size_t>(d.out);
        L.hidden = d;
        flat = arch.hidden_units;
    }
    L.head = DenseGeom{flat, arch.outputs(), off, 0};
    off += static_cast<std::size_t>(L.head.in) * L.head.out;
    L.head.b_off = off;
    off += static_cast<std::size_t>(L.head.out);
    L.weight_count = off;
    return L;
}

inline std::size_t parameter_count(const ArchSpec& arch) { return compute_layout(arch).weight_count; }

inline void validate(const PrototypeModel& m) {
    const Layout L = compute_layout(m.arch);
    require(m.weights.size() == L.weight_count, ErrorKind::ArchError,
            "weight count " + std::to_string(m.weights.size()) + " does not match architecture (" +
                std::to_string(L.weight_count) + ")");
    for (double w : m.weights) require(std::isfinite(w), ErrorKind::ArchError, "non-finite weight");
}

// He-uniform: W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)) drawn in layout order
// from stream kWeightInit; biases start at zero.
inline PrototypeModel init_model(const ArchSpec& arch, std::uint64_t seed) {
    const Layout L = compute_layout(arch);
    PrototypeModel m;
    m.arch = arch;
    m.seed = seed;
    m.weights.assign(L.weight_count, 0.0);
    Rng rng(seed, streams::kWeightInit);
    auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < n; ++i) m.weights[off + i] = rng.uniform(-bound, bound);
    };
    for (const auto& g : L.convs) fill(g.w_off, static_cast<std::size_t>(g.filters) * g.in_c * g.k * g.k, g.in_c * g.k * g.k);
    if (L.hidden) fill(L.hidden->w_off, static_cast<std::size_t>(L.hidden->in) * L.hidden->out, L.hidden->in);
    fill(L.head.w_off, static_cast<std::size_t>(L.head.in) * L.head.out, L.head.in);
    return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct Activations {
    std::vector<std::vector<double>> conv_out;   // post-ReLU, per stage
    std::vector<std::vector<double>> stage_out;  // stage outputs (after pool)
    std::vector<std::vector<std::uint32_t>> pool_arg;
    std::vector<double> hidden_out;              // post-ReLU
    std::vector<double> outputs;                 // logits or scalar
};

namespace detail {

inline void conv_forward(const ConvGeom& g, const double* W, const double* in, double* out) {
    const std::size_t plane_out = static_cast<std::size_t>(g.out_h) * g.out_w;
    const std::size_t plane_in = static_cast<std::size_t>(g.in_h) * g.in_w;
    for (int f = 0; f < g.filters; ++f) {
        double* o = out + f * plane_out;
        std::fill(o, o + plane_out, W[g.b_off + f]);
        for (int c = 0; c < g.in_c; ++c) {
            const double* ic = in + c * plane_in;
            for (int ky = 0; ky < g.k; ++ky) {
                for (int kx = 0; kx < g.k; ++kx) {
                    const double w = W[g.w_off + ((static_cast<std::size_t>(f) * g.in_c + c) * g.k + ky) * g.k + kx];
                    // valid ox: 0 <= ox*s + kx - pad < in_w
                    int ox_lo = 0;
                    while (ox_lo < g.out_w && ox_lo * g.stride + kx - g.pad < 0) ++ox_lo;
                    int ox_hi = g.out_w - 1;
                    while (ox_hi >= ox_lo && ox_hi * g.stride + kx - g.pad >= g.in_w) --ox_hi;
                    for (int oy = 0; oy < g.out_h; ++oy) {
                        const int iy = oy * g.stride + ky - g.pad;
                        if (iy < 0 || iy >= g.in_h) continue;
                        const double* irow = ic + static_cast<std::size_t>(iy) * g.in_w + kx - g.pad;
                        double* orow = o + static_cast<std::size_t>(oy) * g.out_w;
                        if (g.stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w * irow[ox];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w * irow[ox * g.stride];
                        }
                    }
                }
            }
        }
        for (std::size_t i = 0; i < plane_out; ++i) o[i] = o[i] > 0.0 ? o[i] : 0.0;
    }
}

// d_out is the gradient w.r.t. the post-ReLU conv output; out is that output.
inline void conv_backward(const ConvGeom& g, const double* W, const double* in, const double* out, const double* d_out,
                          double* d_in, double* dW) {
    const std::size_t plane_out = static_cast<std::size_t>(g.out_h) * g.out_w;
    const std::size_t plane_in = static_cast<std::size_t>(g.in_h) * g.in_w;
    std::vector<double> d_pre(plane_out);
    for (int f = 0; f < g.filters; ++f) {
        const double* of = out + f * plane_out;
        const double* dof = d_out + f * plane_out;
        double bias_grad = 0.0;
        for (std::size_t i = 0; i < plane_out; ++i) {
            d_pre[i] = of[i] > 0.0 ? dof[i] : 0.0;
            bias_grad += d_pre[i];
        }
        if (dW) dW[g.b_off + f] += bias_grad;
        for (int c = 0; c < g.in_c; ++c) {
            const double* ic = in + c * plane_in;
            double* dic = d_in ? d_in + c * plane_in : nullptr;
            for (int ky = 0; ky < g.k; ++ky) {
                for (int kx = 0; kx < g.k; ++kx) {
                    const std::size_t widx = g.w_off + ((static_cast<std::size_t>(f) * g.in_c + c) * g.k + ky) * g.k + kx;
                    const double w = W[widx];
                    int ox_lo = 0;
                    while (ox_lo < g.out_w && ox_lo * g.stride + kx - g.pad < 0) ++ox_lo;
                    int ox_hi = g.out_w - 1;
                    while (ox_hi >= ox_lo && ox_hi * g.stride + kx - g.pad >= g.in_w) --ox_hi;
                    double wg = 0.0;
                    for (int oy = 0; oy < g.out_h; ++oy) {
                        const int iy = oy * g.stride + ky - g.pad;
                        if (iy < 0 || iy >= g.in_h) continue;
                        const std::size_t ibase = static_cast<std::size_t>(iy) * g.in_w + kx - g.pad;
                        const double* drow = d_pre.data() + static_cast<std::size_t>(oy) * g.out_w;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                            const std::size_t ii = ibase + static_cast<std::size_t>(ox) * g.stride;
                            wg += drow[ox] * ic[ii];
                            if (dic) dic[ii] += w * drow[ox];
                        }
                    }
                    if (dW) dW[widx] += wg;
                }
            }
        }
    }
}

inline void pool_forward(const ConvGeom& g, const double* in, double* out, std::uint32_t* arg) {
    for (int f = 0; f < g.filters; ++f) {
        const double* pf = in + static_cast<std::size_t>(f) * g.out_h * g.out_w;
        for (int py = 0; py < g.pool_h; ++py) {
            for (int px = 0; px < g.pool_w; ++px) {
                std::uint32_t best = static_cast<std::uint32_t>((2 * py) * g.out_w + 2 * px);
                double bv = pf[best];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const auto idx = static_cast<std::uint32_t>((2 * py + dy) * g.out_w + 2 * px + dx);
                        if (pf[idx] > bv) {
                            bv = pf[idx];
                            best = idx;
                        }
                    }
                const std::size_t o = (static_cast<std::size_t>(f) * g.pool_h + py) * g.pool_w + px;
                out[o] = bv;
                arg[o] = best;
            }
        }
    }
}

inline void dense_forward(const DenseGeom& d, const double* W, const double* in, double* out, bool relu) {
    for (int j = 0; j < d.out; ++j) {
        const double* row = W + d.w_off + static_cast<std::size_t>(j) * d.in;
        double s = 0.0;
        for (int i = 0; i < d.in; ++i) s += row[i] * in[i];
        s += W[d.b_off + j];
        out[j] = relu ? (s > 0.0 ? s : 0.0) : s;
    }
}

// d_out w.r.t. the layer output (post-ReLU if relu); out is that output.
inline void dense_backward(const DenseGeom& d, const double* W, const double* in, const double* out, const double* d_out,
                           bool relu, double* d_in, double* dW) {
    for (int j = 0; j < d.out; ++j) {
        const double g = relu ? (out[j] > 0.0 ? d_out[j] : 0.0) : d_out[j];
        if (g == 0.0) continue;
        const double* row = W + d.w_off + static_cast<std::size_t>(j) * d.in;
        if (dW) {
            double* drow = dW + d.w_off + static_cast<std::size_t>(j) * d.in;
            for (int i = 0; i < d.in; ++i) drow[i] += g * in[i];
            dW[d.b_off + j] += g;
        }
        if (d_in)
            for (int i = 0; i < d.in; ++i) d_in[i] += g * row[i];
    }
}

}  // namespace detail

// Raw network outputs (logits or scalar) for an input plane already in model
// space (input_size x input_size, normalized).
inline std::vector<double> forward_outputs(const Layout& L, std::span<const double> weights, std::span<const double> input,
                                           Activations* acts = nullptr) {
    require(input.size() == static_cast<std::size_t>(L.input_size) * L.input_size, ErrorKind::ShapeMismatch,
            "input has " + std::to_string(input.size()) + " values, model expects " +
                std::to_string(L.input_size) + "x" + std::to_string(L.input_size));
    Activations local;
    Activations& a = acts ? *acts : local;
    a.conv_out.resize(L.convs.size());
    a.stage_out.resize(L.convs.size());
    a.pool_arg.resize(L.convs.size());
    const double* W = weights.data();
    const double* cur = input.data();
    for (std::size_t s = 0; s < L.convs.size(); ++s) {
        const auto& g = L.convs[s];
        a.conv_out[s].resize(g.conv_size());
        detail::conv_forward(g, W, cur, a.conv_out[s].data());
        if (g.pool) {
            a.stage_out[s].resize(g.stage_size());
            a.pool_arg[s].resize(g.stage_size());
            detail::pool_forward(g, a.conv_out[s].data(), a.stage_out[s].data(), a.pool_arg[s].data());
            cur = a.stage_out[s].data();
        } else {
            cur = a.conv_out[s].data();
        }
    }
    if (L.hidden) {
        a.hidden_out.resize(static_cast<std::size_t>(L.hidden->out));
        detail::dense_forward(*L.hidden, W, cur, a.hidden_out.data(), true);
        cur = a.hidden_out.data();
    }
    a.outputs.resize(static_cast<std::size_t>(L.head.out));
    detail::dense_forward(L.head, W, cur, a.outputs.data(), false);
    return a.outputs;
}

// Backpropagates d_outputs (gradient w.r.t. logits / scalar output) through a
// cached forward pass. Either of d_input / d_weights may be null; both are
// accumulated into, not overwritten.
inline void backward(const Layout& L, std::span<const double> weights, std::span<const double> input, const Activations& a,
                     std::span<const double> d_outputs, double* d_input, double* d_weights) {
    const double* W = weights.data();
    auto stage_input = [&](std::size_t s) -> const double* {
        if (s == 0) return input.data();
        const auto& prev = L.convs[s - 1];
        return prev.pool ? a.stage_out[s - 1].data() : a.conv_out[s - 1].data();
    };
    const double* last = L.convs.empty() ? input.data() : stage_input(L.convs.size());

    std::vector<double> d_last(static_cast<std::size_t>(L.hidden ? L.hidden->in : L.head.in), 0.0);
    if (L.hidden) {
        std::vector<double> d_hidden(static_cast<std::size_t>(L.hidden->out), 0.0);
        detail::dense_backward(L.head, W, a.hidden_out.data(), a.outputs.data(), d_outputs.data(), false, d_hidden.data(),
                               d_weights);
        detail::dense_backward(*L.hidden, W, last, a.hidden_out.data(), d_hidden.data(), true, d_last.data(), d_weights);
    } else {
        detail::dense_backward(L.head, W, last, a.outputs.data(), d_outputs.data(), false, d_last.data(), d_weights);
    }
    if (L.convs.empty()) {
        if (d_input)
            for (std::size_t i = 0; i < d_last.size(); ++i) d_input[i] += d_last[i];
        return;
    }
    std::vector<double> d_stage = std::move(d_last);
    for (std::size_t s = L.convs.size(); s-- > 0;) {
        const auto& g = L.convs[s];
        std::vector<double> d_conv;
        if (g.pool) {
            d_conv.assign(g.conv_size(), 0.0);
            const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
            const std::size_t pplane = static_cast<std::size_t>(g.pool_h) * g.pool_w;
            for (int f = 0; f < g.filters; ++f)
                for (std::size_t i = 0; i < pplane; ++i)
                    d_conv[f * plane + a.pool_arg[s][f * pplane + i]] += d_stage[f * pplane + i];
        } else {
            d_conv = std::move(d_stage);
        }
        const bool need_in = s > 0 || d_input != nullptr;
        std::vector<double> d_in;
        if (need_in) d_in.assign(static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w, 0.0);
        detail::conv_backward(g, W, stage_input(s), a.conv_out[s].data(), d_conv.data(), need_in ? d_in.data() : nullptr,
                              d_weights);
        if (s == 0) {
            if (d_input)
                for (std::size_t i = 0; i < d_in.size(); ++i) d_input[i] += d_in[i];
        } else {
            d_stage = std::move(d_in);
        }
    }
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

inline Prediction make_prediction(Head head, std::vector<double> outputs) {
    Prediction p;
    if (head == Head::LinearScalar) {
        p.value = outputs[0];
        p.confidence = 1.0;
        return p;
    }
    p.probabilities = softmax(outputs);
    p.logits = std::move(outputs);
    const auto it = std::max_element(p.probabilities.begin(), p.probabilities.end());
    p.predicted_class = static_cast<int>(it - p.probabilities.begin());
    p.confidence = *it;
    return p;
}

// ---------------------------------------------------------------------------
// Model-facing API

// Forward on a plane already in model space.
inline Prediction forward(const PrototypeModel& model, const Plane& input) {
    const Layout L = compute_layout(model.arch);
    require(input.width == model.arch.input_size && input.height == model.arch.input_size, ErrorKind::ShapeMismatch,
            "input is " + std::to_string(input.width) + "x" + std::to_string(input.height) + ", model expects " +
                std::to_string(model.arch.input_size));
    return make_prediction(model.arch.head, forward_outputs(L, model.weights, input.values));
}

// Cross-entropy with probability clamped at 1e-12, or squared error.
inline double loss(const Prediction& pred, double label) {
    if (pred.probabilities.empty()) {
        const double d = pred.value - label;
        return d * d;
    }
    const auto cls = static_cast<std::size_t>(label);
    return -std::log(std::max(pred.probabilities.at(cls), 1e-12));
}

// Exact derivative of the target logit (classification) or the scalar output
// (regression) with respect to each model-space input pixel.
inline Plane grad_input(const PrototypeModel& model, const Plane& input, int target) {
    const Layout L = compute_layout(model.arch);
    require(input.width == model.arch.input_size && input.height == model.arch.input_size, ErrorKind::ShapeMismatch,
            "input dims do not match model");
    Activations a;
    forward_outputs(L, model.weights, input.values, &a);
    std::vector<double> d_out(static_cast<std::size_t>(L.head.out), 0.0);
    if (model.arch.head == Head::Softmax) {
        require(target >= 0 && target < L.head.out, ErrorKind::InvalidArgument, "target class out of range");
        d_out[static_cast<std::size_t>(target)] = 1.0;
    } else {
        d_out[0] = 1.0;
    }
    Plane g(input.width, input.height);
    backward(L, model.weights, input.values, a, d_out, g.values.data(), nullptr);
    return g;
}

// Per-sample loss and its gradient w.r.t. every weight.
inline double loss_and_weight_grad(const Layout& L, const PrototypeModel& model, std::span<const double> input,
                                   double label, std::span<double> grad) {
    Activations a;
    auto out = forward_outputs(L, model.weights, input, &a);
    std::vector<double> d_out(out.size());
    double l;
    if (model.arch.head == Head::Softmax) {
        const auto p = softmax(out);
        const auto cls = static_cast<std::size_t>(label);
        l = -std::log(std::max(p[cls], 1e-12));
        for (std::size_t i = 0; i < p.size(); ++i) d_out[i] = p[i] - (i == cls ? 1.0 : 0.0);
    } else {
        const double d = out[0] - label;
        l = d * d;
        d_out[0] = 2.0 * d;
    }
    backward(L, model.weights, input, a, d_out, nullptr, grad.data());
    return l;
}

// ---------------------------------------------------------------------------
// Input pipeline

// Stored pixels (or calibrated values) -> resampled to the model grid ->
// normalized. Images already at model resolution are not resampled.
inline Plane image_values(const ImageSlice& slice, const CalibrationMeta& meta, const InputSpec& spec) {
    if (!spec.use_calibration) return to_plane(slice);
    const auto cal = apply_calibration(slice, meta);
    Plane p(slice.width, slice.height);
    p.values = cal.values;
    return p;
}

inline void normalize_in_place(Plane& p, const InputSpec& spec) {
    switch (spec.normalization) {
        case Normalization::PerImageZscore: {
            double mean = 0.0;
            for (double v : p.values) mean += v;
            mean /= static_cast<double>(p.values.size());
            double var = 0.0;
            for (double v : p.values) var += (v - mean) * (v - mean);
            var /= static_cast<double>(p.values.size());
            const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
            for (double& v : p.values) v = (v - mean) / sd;
            break;
        }
        case Normalization::GlobalMinmax: {
            const double span = spec.hi > spec.lo ? spec.hi - spec.lo : 1.0;
            for (double& v : p.values) v = (v - spec.lo) / span;
            break;
        }
        case Normalization::Raw: break;
    }
}

inline Plane prepare_input(const ImageSlice& slice, const CalibrationMeta& meta, const InputSpec& spec, int input_size) {
    Plane p = resample_bilinear(image_values(slice, meta, spec), input_size, input_size);
    normalize_in_place(p, spec);
    return p;
}

inline Plane prepare_input(const PrototypeModel& model, const ImageSlice& slice, const CalibrationMeta& meta) {
    return prepare_input(slice, meta, model.input, model.arch.input_size);
}

}  // namespace xaudit
