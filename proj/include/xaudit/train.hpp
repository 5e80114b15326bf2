#pragma once

// Mini-batch SGD for the prototype. No momentum, no regularization.
//
// Epoch e visits the images in the order of a Fisher-Yates shuffle drawn from
// stream kShuffle + e of the config seed. Each batch gradient is the mean of
// per-sample gradients summed in visiting order, so the result is
// bit-identical for any worker count.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "xaudit/json_util.hpp"
#include "xaudit/model.hpp"

namespace xaudit {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    Normalization normalization = Normalization::GlobalMinmax;
    bool use_calibration = false;
};

inline void validate(const TrainConfig& c) {
    require(c.epochs >= 1, ErrorKind::ConfigError, "epochs must be >= 1");
    require(c.batch_size >= 1, ErrorKind::ConfigError, "batch_size must be >= 1");
    require(std::isfinite(c.learning_rate) && c.learning_rate >= 0.0, ErrorKind::ConfigError,
            "learning_rate must be finite and non-negative");
}

struct TrainResult {
    PrototypeModel model;
    std::vector<double> history;  // mean per-sample loss of each epoch
};

inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed, streams::kShuffle + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    return order;
}

// Fits the InputSpec range (global_minmax) from the given images.
inline InputSpec fit_input_spec(const DatasetManifest& manifest, const std::vector<ImageSlice>& images,
                                Normalization mode, bool use_calibration) {
    InputSpec spec;
    spec.normalization = mode;
    spec.use_calibration = use_calibration;
    if (mode == Normalization::GlobalMinmax) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Plane p = image_values(images[i], manifest.entries[i].calibration, spec);
            for (double v : p.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        spec.lo = lo;
        spec.hi = hi > lo ? hi : lo + 1.0;
    }
    return spec;
}

inline std::vector<Plane> prepare_inputs(const PrototypeModel& model, const DatasetManifest& manifest,
                                         const std::vector<ImageSlice>& images, unsigned workers = 1) {
    std::vector<Plane> inputs(images.size());
    parallel_for(images.size(), workers, [&](std::size_t i) {
        inputs[i] = prepare_input(model, images[i], manifest.entries[i].calibration);
    });
    return inputs;
}

inline void check_labels(const ArchSpec& arch, const DatasetManifest& manifest) {
    const bool cls = manifest.task == Task::Classification;
    require(cls == (arch.head == Head::Softmax), ErrorKind::InvalidArgument, "model head does not match dataset task");
    if (cls)
        for (const auto& e : manifest.entries)
            require(e.label >= 0 && e.label < arch.class_count, ErrorKind::LabelOutOfRange,
                    "label of '" + e.id + "' outside the model's classes");
}

inline TrainResult train(const PrototypeModel& initial, const DatasetManifest& manifest,
                         const std::vector<ImageSlice>& images, const TrainConfig& cfg, unsigned workers = 1) {
    validate(cfg);
    validate(initial);
    require(!images.empty(), ErrorKind::EmptyDataset, "no images to train on");
    require(images.size() == manifest.entries.size(), ErrorKind::InvalidArgument, "manifest/image count mismatch");
    check_labels(initial.arch, manifest);

    TrainResult result;
    result.model = initial;
    result.model.input = fit_input_spec(manifest, images, cfg.normalization, cfg.use_calibration);
    const auto inputs = prepare_inputs(result.model, manifest, images, workers);
    const Layout L = compute_layout(result.model.arch);
    const std::size_t n = images.size();
    const std::size_t nw = L.weight_count;

    std::vector<std::vector<double>> sample_grads(static_cast<std::size_t>(cfg.batch_size), std::vector<double>(nw));
    std::vector<double> sample_loss(static_cast<std::size_t>(cfg.batch_size));
    std::vector<double> batch_grad(nw);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_order(n, cfg.seed, epoch);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - start);
            parallel_for(count, workers, [&](std::size_t j) {
                auto& g = sample_grads[j];
                std::fill(g.begin(), g.end(), 0.0);
                const std::size_t idx = order[start + j];
                sample_loss[j] = loss_and_weight_grad(L, result.model, inputs[idx].values, manifest.entries[idx].label, g);
            });
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t j = 0; j < count; ++j) {
                batch_loss += sample_loss[j];
                const auto& g = sample_grads[j];
                for (std::size_t w = 0; w < nw; ++w) batch_grad[w] += g[w];
            }
            if (!std::isfinite(batch_loss)) {
                std::ostringstream ss;
                ss << "loss became non-finite at epoch " << epoch << ", batch " << batch_index;
                fail(ErrorKind::NonFiniteLoss, ss.str());
            }
            epoch_loss += batch_loss;
            const double step = cfg.learning_rate / static_cast<double>(count);
            for (std::size_t w = 0; w < nw; ++w) result.model.weights[w] -= step * batch_grad[w];
            for (std::size_t w = 0; w < nw; ++w) {
                if (!std::isfinite(result.model.weights[w])) {
                    std::ostringstream ss;
                    ss << "weights became non-finite at epoch " << epoch << ", batch " << batch_index;
                    fail(ErrorKind::NonFiniteLoss, ss.str());
                }
            }
        }
        result.history.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

// Fraction of images whose predicted class equals the label (classification).
inline double accuracy(const PrototypeModel& model, const DatasetManifest& manifest, const std::vector<ImageSlice>& images,
                       unsigned workers = 1) {
    require(model.arch.head == Head::Softmax, ErrorKind::InvalidArgument, "accuracy needs a classification model");
    if (images.empty()) return 0.0;
    std::vector<int> correct(images.size(), 0);
    parallel_for(images.size(), workers, [&](std::size_t i) {
        const auto pred = forward(model, prepare_input(model, images[i], manifest.entries[i].calibration));
        correct[i] = pred.predicted_class == manifest.class_of(i) ? 1 : 0;
    });
    double s = 0.0;
    for (int c : correct) s += c;
    return s / static_cast<double>(images.size());
}

inline Json to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["seed"] = c.seed;
    j["normalization"] = to_string(c.normalization);
    j["use_calibration"] = c.use_calibration;
    return j;
}

inline TrainConfig train_config_from_json(const Json& j, TrainConfig c = {}, ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "train config", err);
    c.epochs = static_cast<int>(o.integer_or("epochs", c.epochs));
    c.batch_size = static_cast<int>(o.integer_or("batch_size", c.batch_size));
    c.learning_rate = o.number_or("learning_rate", c.learning_rate);
    if (const Json* seed = o.find("seed")) {
        require(seed->is_number_unsigned() || (seed->is_number_integer() && seed->get<long long>() >= 0), err,
                "train config: seed must be a non-negative integer");
        c.seed = seed->get<std::uint64_t>();
    }
    if (o.has("normalization")) c.normalization = parse_normalization(o.string("normalization"));
    c.use_calibration = o.boolean_or("use_calibration", c.use_calibration);
    o.finish();
    validate(c);
    return c;
}

inline Json to_json(const ArchSpec& a) {
    Json j;
    j["input_size"] = a.input_size;
    Json convs = Json::array();
    for (const auto& c : a.conv_layers)
        convs.push_back(Json{{"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride}, {"pool", c.pool}});
    j["conv_layers"] = std::move(convs);
    j["hidden_units"] = a.hidden_units;
    j["head"] = a.head == Head::Softmax ? "softmax" : "linear";
    j["class_count"] = a.class_count;
    return j;
}

// Partial documents override the given defaults; the head always follows the task.
inline ArchSpec arch_from_json(const Json& j, ArchSpec a, ErrorKind err = ErrorKind::ConfigError) {
    StrictObject o(j, "arch", err);
    a.input_size = static_cast<int>(o.integer_or("input_size", a.input_size));
    if (const Json* convs = o.find("conv_layers")) {
        require(convs->is_array(), err, "arch: conv_layers must be an array");
        a.conv_layers.clear();
        for (const auto& jc : *convs) {
            StrictObject co(jc, "arch.conv_layers", err);
            ConvSpec c;
            c.filters = static_cast<int>(co.integer("filters"));
            c.kernel = static_cast<int>(co.integer_or("kernel", c.kernel));
            c.stride = static_cast<int>(co.integer_or("stride", c.stride));
            c.pool = co.boolean_or("pool", c.pool);
            co.finish();
            a.conv_layers.push_back(c);
        }
    }
    a.hidden_units = static_cast<int>(o.integer_or("hidden_units", a.hidden_units));
    if (o.has("head")) {
        const auto h = o.string("head");
        require(h == "softmax" || h == "linear", err, "arch: head must be 'softmax' or 'linear'");
        require((h == "softmax") == (a.head == Head::Softmax), err, "arch: head does not match the dataset task");
    }
    o.find("class_count");
    o.finish();
    compute_layout(a);
    return a;
}

}  // namespace xaudit
