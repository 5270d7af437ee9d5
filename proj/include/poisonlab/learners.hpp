#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/rng.hpp"

// Classifiers of varying capacity under one interface:
//   - logistic_regression: linear logit, sigmoid output
//   - mlp: fully connected, rectified-linear hidden units, sigmoid output
//   - zero_local_oracle: the idealized completely locally dependent learner;
//     predicts each subpopulation's majority training label
//
// Trainable families fit by plain mini-batch SGD on cross-entropy, with a
// fixed initialization stream and fixed shuffle stream derived from the
// config seed, so training is reproducible bit for bit.

namespace poisonlab {

enum class LearnerFamily { logistic_regression, mlp, zero_local_oracle };

inline std::string family_name(LearnerFamily f) {
    switch (f) {
        case LearnerFamily::logistic_regression: return "logistic_regression";
        case LearnerFamily::mlp: return "mlp";
        case LearnerFamily::zero_local_oracle: return "zero_local_oracle";
    }
    throw validation_error("unknown learner family");
}

inline LearnerFamily family_from_name(const std::string& name) {
    if (name == "logistic_regression") return LearnerFamily::logistic_regression;
    if (name == "mlp") return LearnerFamily::mlp;
    if (name == "zero_local_oracle") return LearnerFamily::zero_local_oracle;
    throw validation_error("unknown learner family '" + name + "'");
}

struct LearnerConfig {
    LearnerFamily family = LearnerFamily::logistic_regression;
    std::vector<int> hidden_layers;  // mlp only
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.1;
    double l2_penalty = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        const bool trainable = family != LearnerFamily::zero_local_oracle;
        if (family == LearnerFamily::mlp && hidden_layers.empty())
            throw validation_error("learner: mlp requires hidden_layers");
        if (family != LearnerFamily::mlp && !hidden_layers.empty())
            throw validation_error("learner: hidden_layers only valid for mlp");
        for (int h : hidden_layers)
            if (h <= 0) throw validation_error("learner: hidden layer widths must be positive");
        if (trainable) {
            if (epochs < 1) throw validation_error("learner: epochs must be >= 1");
            if (batch_size < 1) throw validation_error("learner: batch_size must be >= 1");
            if (learning_rate <= 0.0) throw validation_error("learner: learning_rate must be > 0");
            if (l2_penalty < 0.0) throw validation_error("learner: l2_penalty must be >= 0");
        }
    }

    // Stable short name used in seeds, reports, and file names.
    std::string tag() const {
        switch (family) {
            case LearnerFamily::logistic_regression: return "logreg";
            case LearnerFamily::zero_local_oracle: return "oracle";
            case LearnerFamily::mlp: {
                std::string t = "mlp";
                for (int h : hidden_layers) t += "_" + std::to_string(h);
                return t;
            }
        }
        throw validation_error("unknown learner family");
    }
};

inline std::size_t mlp_param_count(int input_dim, const std::vector<int>& hidden_layers) {
    std::size_t total = 0;
    int in = input_dim;
    for (int h : hidden_layers) {
        total += static_cast<std::size_t>(in) * static_cast<std::size_t>(h) +
                 static_cast<std::size_t>(h);
        in = h;
    }
    total += static_cast<std::size_t>(in) + 1;  // final linear unit
    return total;
}

namespace detail {

// Flat parameter layout: per layer, row-major weight matrix (out x in) then
// bias vector (out).
struct NetShape {
    std::vector<int> dims;              // [d, h..., 1]
    std::vector<std::size_t> w_offset;  // per layer
    std::vector<std::size_t> b_offset;
    std::size_t total = 0;

    static NetShape make(const std::vector<int>& dims) {
        NetShape s;
        s.dims = dims;
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            s.w_offset.push_back(off);
            off += static_cast<std::size_t>(dims[l]) * static_cast<std::size_t>(dims[l + 1]);
            s.b_offset.push_back(off);
            off += static_cast<std::size_t>(dims[l + 1]);
        }
        s.total = off;
        return s;
    }

    std::size_t layers() const { return dims.size() - 1; }

    bool is_weight(std::size_t param_index) const {
        for (std::size_t l = 0; l < layers(); ++l)
            if (param_index >= w_offset[l] && param_index < b_offset[l]) return true;
        return false;
    }
};

struct NetWorkspace {
    std::vector<std::vector<double>> activations;  // a_0..a_L (a_0 holds the input copy)
    std::vector<std::vector<double>> deltas;       // per layer output
    std::vector<int> dims_cache;

    void resize(const NetShape& shape) {
        if (dims_cache == shape.dims) return;
        dims_cache = shape.dims;
        activations.assign(shape.dims.size(), {});
        deltas.assign(shape.layers(), {});
        for (std::size_t l = 0; l < shape.dims.size(); ++l)
            activations[l].resize(static_cast<std::size_t>(shape.dims[l]));
        for (std::size_t l = 0; l < shape.layers(); ++l)
            deltas[l].resize(static_cast<std::size_t>(shape.dims[l + 1]));
    }
};

// Returns the output logit; hidden activations are rectified in place.
inline double forward_logit(const NetShape& shape, const std::vector<double>& params,
                            std::span<const double> x, NetWorkspace& ws) {
    std::copy(x.begin(), x.end(), ws.activations[0].begin());
    for (std::size_t l = 0; l < shape.layers(); ++l) {
        const int in = shape.dims[l];
        const int out = shape.dims[l + 1];
        const double* w = params.data() + shape.w_offset[l];
        const double* b = params.data() + shape.b_offset[l];
        const double* a = ws.activations[l].data();
        double* z = ws.activations[l + 1].data();
        for (int o = 0; o < out; ++o) {
            const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += row[i] * a[i];
            const bool is_output = (l + 1 == shape.layers());
            z[o] = is_output ? acc : (acc > 0.0 ? acc : 0.0);
        }
    }
    return ws.activations[shape.layers()][0];
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Cross-entropy of sigmoid(z) against label y, in the overflow-safe form.
inline double bce_from_logit(double z, int y) {
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return softplus - static_cast<double>(y) * z;
}

// Accumulates the gradient of this sample's cross-entropy into grad.
// Requires ws to hold the sample's forward pass.
inline void backward_accumulate(const NetShape& shape, const std::vector<double>& params,
                                int y, NetWorkspace& ws, std::vector<double>& grad) {
    const std::size_t L = shape.layers();
    const double z_out = ws.activations[L][0];
    ws.deltas[L - 1][0] = sigmoid(z_out) - static_cast<double>(y);

    for (std::size_t l = L; l-- > 0;) {
        const int in = shape.dims[l];
        const int out = shape.dims[l + 1];
        const double* a = ws.activations[l].data();
        const double* delta = ws.deltas[l].data();
        double* gw = grad.data() + shape.w_offset[l];
        double* gb = grad.data() + shape.b_offset[l];
        for (int o = 0; o < out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            double* grow = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int i = 0; i < in; ++i) grow[i] += d * a[i];
            gb[o] += d;
        }
        if (l == 0) break;
        // dL/dz_l = (W_l^T delta_l) masked by relu'(z_l); the stored rectified
        // activation carries the sign of z_l.
        const double* w = params.data() + shape.w_offset[l];
        double* dprev = ws.deltas[l - 1].data();
        for (int i = 0; i < in; ++i) {
            if (ws.activations[l][static_cast<std::size_t>(i)] <= 0.0) {
                dprev[i] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (int o = 0; o < out; ++o)
                acc += w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in) + i] *
                       delta[o];
            dprev[i] = acc;
        }
    }
}

}  // namespace detail

struct TrainedModel {
    LearnerFamily family = LearnerFamily::logistic_regression;
    std::vector<int> layer_dims;     // [d, hidden..., 1]; empty for oracle
    std::vector<double> parameters;  // flat; empty for oracle
    std::map<int, int> oracle_table; // subpop_id -> predicted label (oracle only)
    int global_majority = 1;         // oracle fallback for unseen subpopulations
    LearnerConfig config;
    int feature_dim = 0;
    std::vector<double> epoch_losses;  // mean training loss per epoch (diagnostics)

    std::size_t param_count() const { return parameters.size(); }
};

// Fits the configured family on the dataset. Deterministic given config.seed.
inline TrainedModel train(const LearnerConfig& config, const Dataset& dataset) {
    config.validate();
    if (dataset.empty()) throw validation_error("train: dataset is empty");
    for (const auto& s : dataset.samples)
        if (s.label != 0 && s.label != 1)
            throw validation_error("train: labels must be binary");

    TrainedModel model;
    model.family = config.family;
    model.config = config;
    model.feature_dim = dataset.feature_dim;

    if (config.family == LearnerFamily::zero_local_oracle) {
        // Majority label per subpopulation; ties resolve to 1.
        std::map<int, std::pair<std::size_t, std::size_t>> counts;  // subpop -> (n, ones)
        std::size_t total = 0, total_ones = 0;
        for (const auto& s : dataset.samples) {
            auto& c = counts[s.subpop_id];
            ++c.first;
            c.second += static_cast<std::size_t>(s.label);
            ++total;
            total_ones += static_cast<std::size_t>(s.label);
        }
        for (const auto& [id, c] : counts)
            model.oracle_table[id] = (2 * c.second >= c.first) ? 1 : 0;
        model.global_majority = (2 * total_ones >= total) ? 1 : 0;
        return model;
    }

    std::vector<int> dims;
    dims.push_back(dataset.feature_dim);
    for (int h : config.hidden_layers) dims.push_back(h);
    dims.push_back(1);
    const auto shape = detail::NetShape::make(dims);
    model.layer_dims = dims;
    model.parameters.assign(shape.total, 0.0);

    // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    RngStream init_rng(config.seed, "init");
    for (std::size_t l = 0; l < shape.layers(); ++l) {
        const int in = shape.dims[l];
        const int out = shape.dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        double* w = model.parameters.data() + shape.w_offset[l];
        const std::size_t n_w = static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
        for (std::size_t i = 0; i < n_w; ++i)
            w[i] = (2.0 * init_rng.uniform01() - 1.0) * limit;
    }

    RngStream shuffle_rng(config.seed, "shuffle");
    detail::NetWorkspace ws;
    ws.resize(shape);
    std::vector<double> grad(shape.total, 0.0);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t n = dataset.size();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    model.epoch_losses.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            const double inv = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = dataset.samples[order[b]];
                const double z = detail::forward_logit(shape, model.parameters, s.features, ws);
                epoch_loss += detail::bce_from_logit(z, s.label);
                detail::backward_accumulate(shape, model.parameters, s.label, ws, grad);
            }
            for (std::size_t i = 0; i < shape.total; ++i) {
                double g = grad[i] * inv;
                if (config.l2_penalty > 0.0 && shape.is_weight(i))
                    g += config.l2_penalty * model.parameters[i];
                model.parameters[i] -= config.learning_rate * g;
            }
        }
        epoch_loss /= static_cast<double>(n);
        if (config.l2_penalty > 0.0) {
            double w2 = 0.0;
            for (std::size_t i = 0; i < shape.total; ++i)
                if (shape.is_weight(i)) w2 += model.parameters[i] * model.parameters[i];
            epoch_loss += 0.5 * config.l2_penalty * w2;
        }
        if (!std::isfinite(epoch_loss))
            throw training_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " (family " + config.tag() + ", lr " +
                                 format_double(config.learning_rate) + ")");
        model.epoch_losses.push_back(epoch_loss);
    }
    return model;
}

// Sigmoid network output in [0,1]. Trainable families only.
inline double predict_proba(const TrainedModel& model, std::span<const double> features) {
    if (model.family == LearnerFamily::zero_local_oracle)
        throw unsupported_error("predict_proba: not defined for the 0-local oracle");
    if (static_cast<int>(features.size()) != model.feature_dim)
        throw validation_error("predict_proba: feature dimension mismatch");
    const auto shape = detail::NetShape::make(model.layer_dims);
    thread_local detail::NetWorkspace ws;
    ws.resize(shape);
    return detail::sigmoid(detail::forward_logit(shape, model.parameters, features, ws));
}

// Predicted label. Probability ties at exactly 0.5 go to 1. The oracle
// requires subpop_id; an unknown subpopulation falls back to the global
// training majority and sets *used_fallback when provided.
inline int predict(const TrainedModel& model, std::span<const double> features,
                   std::optional<int> subpop_id = std::nullopt,
                   bool* used_fallback = nullptr) {
    if (used_fallback) *used_fallback = false;
    if (model.family == LearnerFamily::zero_local_oracle) {
        if (!subpop_id)
            throw validation_error("predict: the 0-local oracle requires a subpop_id");
        auto it = model.oracle_table.find(*subpop_id);
        if (it == model.oracle_table.end()) {
            if (used_fallback) *used_fallback = true;
            return model.global_majority;
        }
        return it->second;
    }
    return predict_proba(model, features) >= 0.5 ? 1 : 0;
}

// Full-batch training loss at the given parameters: mean cross-entropy plus
// 0.5 * l2 * ||weights||^2 (biases excluded). Shared by SGD and the
// finite-difference gradient check.
namespace detail {
inline double full_loss(const NetShape& shape, const std::vector<double>& params,
                        const Dataset& dataset, double l2, NetWorkspace& ws) {
    double loss = 0.0;
    for (const auto& s : dataset.samples)
        loss += bce_from_logit(forward_logit(shape, params, s.features, ws), s.label);
    loss /= static_cast<double>(dataset.size());
    if (l2 > 0.0) {
        double w2 = 0.0;
        for (std::size_t i = 0; i < shape.total; ++i)
            if (shape.is_weight(i)) w2 += params[i] * params[i];
        loss += 0.5 * l2 * w2;
    }
    return loss;
}

inline void full_gradient(const NetShape& shape, const std::vector<double>& params,
                          const Dataset& dataset, double l2, NetWorkspace& ws,
                          std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& s : dataset.samples) {
        forward_logit(shape, params, s.features, ws);
        backward_accumulate(shape, params, s.label, ws, grad);
    }
    const double inv = 1.0 / static_cast<double>(dataset.size());
    for (std::size_t i = 0; i < shape.total; ++i) {
        grad[i] *= inv;
        if (l2 > 0.0 && shape.is_weight(i)) grad[i] += l2 * params[i];
    }
}
}  // namespace detail

struct GradientCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t checked_params = 0;
    double tolerance = 0.0;
    bool passed = false;
};

// Compares the analytic gradient of the full-batch loss against central
// finite differences (step 1e-6) at a random parameter point drawn from the
// config seed. Relative error is |ga - gn| / max(1, |ga|, |gn|).
inline GradientCheckReport gradient_check(const LearnerConfig& config, const Dataset& dataset,
                                          double tolerance) {
    config.validate();
    if (config.family == LearnerFamily::zero_local_oracle)
        throw unsupported_error("gradient_check: trainable families only");
    if (dataset.empty()) throw validation_error("gradient_check: dataset is empty");

    std::vector<int> dims;
    dims.push_back(dataset.feature_dim);
    for (int h : config.hidden_layers) dims.push_back(h);
    dims.push_back(1);
    const auto shape = detail::NetShape::make(dims);

    RngStream point_rng(config.seed, "gradcheck_point");
    std::vector<double> params(shape.total);
    for (auto& p : params) p = point_rng.uniform01() - 0.5;

    detail::NetWorkspace ws;
    ws.resize(shape);
    std::vector<double> analytic(shape.total);
    detail::full_gradient(shape, params, dataset, config.l2_penalty, ws, analytic);

    const double h = 1e-6;
    GradientCheckReport report;
    report.tolerance = tolerance;
    report.checked_params = shape.total;
    std::vector<double> perturbed = params;
    for (std::size_t i = 0; i < shape.total; ++i) {
        perturbed[i] = params[i] + h;
        const double up = detail::full_loss(shape, perturbed, dataset, config.l2_penalty, ws);
        perturbed[i] = params[i] - h;
        const double down = detail::full_loss(shape, perturbed, dataset, config.l2_penalty, ws);
        perturbed[i] = params[i];
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

inline nlohmann::json learner_config_to_json(const LearnerConfig& c) {
    return {{"family", family_name(c.family)},
            {"hidden_layers", c.hidden_layers},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"l2_penalty", c.l2_penalty},
            {"seed", c.seed}};
}

inline LearnerConfig learner_config_from_json(const nlohmann::json& j) {
    LearnerConfig c;
    c.family = family_from_name(j.at("family").get<std::string>());
    if (j.contains("hidden_layers")) c.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("l2_penalty")) c.l2_penalty = j.at("l2_penalty").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline constexpr int kModelFormatVersion = 1;

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["family"] = family_name(model.family);
    j["layer_dims"] = model.layer_dims;
    j["parameters"] = model.parameters;
    j["feature_dim"] = model.feature_dim;
    j["global_majority"] = model.global_majority;
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [id, label] : model.oracle_table) table[std::to_string(id)] = label;
    j["oracle_table"] = table;
    j["config"] = learner_config_to_json(model.config);
    auto out = open_output(path);
    out << j.dump(2) << "\n";
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw io_error("load_model: unsupported format version");
    TrainedModel model;
    model.family = family_from_name(j.at("family").get<std::string>());
    model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    model.parameters = j.at("parameters").get<std::vector<double>>();
    model.feature_dim = j.at("feature_dim").get<int>();
    model.global_majority = j.at("global_majority").get<int>();
    for (const auto& [key, val] : j.at("oracle_table").items())
        model.oracle_table[std::stoi(key)] = val.get<int>();
    model.config = learner_config_from_json(j.at("config"));
    return model;
}

}  // namespace poisonlab
