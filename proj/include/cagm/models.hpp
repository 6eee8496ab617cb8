#pragma once

// Small differentiable models with hand-written backpropagation.
//
// Three architectures share one flattened parameter layout:
//   mlp_regressor   dense chain, linear head, squared-error loss
//   mlp_classifier  dense chain, logit head, softmax cross-entropy
//   seq_model       token embedding table + mean-pool over a trailing window
//                   + dense chain predicting the next token / sequence label
//
// Loss reductions (fixed contract, tests depend on them):
//   regression      (1/B) sum_b ||out_b - y_b||^2   (sum over outputs, mean over batch)
//   classification  (1/B) sum_b [logsumexp(z_b) - z_b[y_b]]   (natural log)
//   sequence        same as classification; one target token per example,
//                   so mean over examples == mean over tokens
//
// Parameter layout: [embedding table (seq only, vocab x embed, row-major)]
// then per layer: W (out x in, row-major), b (out).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cagm/error.hpp"
#include "cagm/linalg.hpp"
#include "cagm/prng.hpp"

namespace cagm {

enum class Architecture { mlp_regressor, mlp_classifier, seq_model };
enum class Activation { tanh, relu };
enum class TaskKind { regression, classification, sequence };

struct ModelSpec {
    Architecture arch = Architecture::mlp_regressor;
    std::vector<int> widths;  // full chain: input, hidden..., output
    Activation activation = Activation::tanh;
    int vocab = 0;   // sequence only: embedding table rows
    int window = 0;  // sequence only: pool over the last `window` tokens; 0 = whole sequence
    std::uint64_t seed = 1;
};

struct TaskBatch {
    TaskKind kind = TaskKind::regression;
    Matrix inputs;                            // tabular kinds: batch x n_features
    std::vector<std::vector<int>> sequences;  // sequence kind: ragged token ids
    Matrix targets;                           // regression: batch x n_outputs
    std::vector<int> labels;                  // classification / sequence

    std::size_t size() const {
        return kind == TaskKind::sequence ? sequences.size() : inputs.rows;
    }
};

inline void validate_spec(const ModelSpec& spec) {
    if (spec.widths.size() < 2) throw ValidationError("ModelSpec: widths needs input and output");
    for (int w : spec.widths)
        if (w <= 0) throw ValidationError("ModelSpec: widths must be positive");
    if (spec.arch == Architecture::seq_model) {
        if (spec.vocab < 2) throw ValidationError("ModelSpec: seq_model needs vocab >= 2");
        if (spec.window < 0) throw ValidationError("ModelSpec: window must be >= 0");
    }
}

inline std::size_t param_count(const ModelSpec& spec) {
    std::size_t d = 0;
    if (spec.arch == Architecture::seq_model)
        d += static_cast<std::size_t>(spec.vocab) * static_cast<std::size_t>(spec.widths[0]);
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l)
        d += static_cast<std::size_t>(spec.widths[l]) * spec.widths[l + 1] + spec.widths[l + 1];
    return d;
}

// Deterministic Glorot-style uniform init: weights in [-s, s] with
// s = sqrt(6/(fan_in+fan_out)); biases exactly zero (no RNG consumed).
// The embedding table is treated as a (vocab x embed) layer for its scale.
inline Vec init_params(const ModelSpec& spec) {
    validate_spec(spec);
    Xoshiro256pp rng(derive_seed(spec.seed, 0x1717));
    Vec w;
    w.reserve(param_count(spec));
    if (spec.arch == Architecture::seq_model) {
        const double s = std::sqrt(6.0 / (spec.vocab + spec.widths[0]));
        for (int i = 0; i < spec.vocab * spec.widths[0]; ++i) w.push_back(rng.uniform(-s, s));
    }
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const int fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (int i = 0; i < fan_in * fan_out; ++i) w.push_back(rng.uniform(-s, s));
        for (int i = 0; i < fan_out; ++i) w.push_back(0.0);
    }
    return w;
}

namespace detail {

struct LayerView {
    const double* weights;  // out x in, row-major
    const double* bias;     // out
    int in, out;
};

inline std::vector<LayerView> layer_views(const Vec& w, const ModelSpec& spec) {
    std::size_t offset = 0;
    if (spec.arch == Architecture::seq_model)
        offset += static_cast<std::size_t>(spec.vocab) * spec.widths[0];
    std::vector<LayerView> views;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        LayerView v{w.data() + offset, nullptr, spec.widths[l], spec.widths[l + 1]};
        offset += static_cast<std::size_t>(v.in) * v.out;
        v.bias = w.data() + offset;
        offset += v.out;
        views.push_back(v);
    }
    return views;
}

inline double activate(double z, Activation a) {
    return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// derivative in terms of the activation output
inline double activate_deriv(double out, Activation a) {
    return a == Activation::tanh ? 1.0 - out * out : (out > 0.0 ? 1.0 : 0.0);
}

// Activations per layer (index 0 = model input); back() is the linear head output.
inline void forward(const std::vector<LayerView>& layers, Activation act, Vec input,
                    std::vector<Vec>& acts) {
    acts.clear();
    acts.push_back(std::move(input));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerView& lv = layers[l];
        Vec z(lv.out);
        for (int o = 0; o < lv.out; ++o) {
            double s = lv.bias[o];
            const double* wrow = lv.weights + static_cast<std::size_t>(o) * lv.in;
            for (int i = 0; i < lv.in; ++i) s += wrow[i] * acts.back()[i];
            z[o] = s;
        }
        if (l + 1 < layers.size())
            for (double& v : z) v = activate(v, act);
        acts.push_back(std::move(z));
    }
}

// Mean of the embedding rows of the last min(window, len) tokens.
inline Vec pool_sequence(const Vec& w, const ModelSpec& spec, const std::vector<int>& tokens,
                         std::size_t* first_pooled = nullptr) {
    if (tokens.empty()) throw ValidationError("seq_model: empty token sequence");
    const int embed = spec.widths[0];
    std::size_t start = 0;
    if (spec.window > 0 && tokens.size() > static_cast<std::size_t>(spec.window))
        start = tokens.size() - static_cast<std::size_t>(spec.window);
    if (first_pooled) *first_pooled = start;
    Vec pooled(embed, 0.0);
    for (std::size_t t = start; t < tokens.size(); ++t) {
        const int tok = tokens[t];
        if (tok < 0 || tok >= spec.vocab)
            throw ValidationError("seq_model: token id " + std::to_string(tok) +
                                  " outside vocab " + std::to_string(spec.vocab));
        const double* row = w.data() + static_cast<std::size_t>(tok) * embed;
        for (int j = 0; j < embed; ++j) pooled[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(tokens.size() - start);
    for (double& v : pooled) v *= inv;
    return pooled;
}

inline Vec example_input(const Vec& w, const ModelSpec& spec, const TaskBatch& batch,
                         std::size_t b) {
    if (spec.arch == Architecture::seq_model) return pool_sequence(w, spec, batch.sequences[b]);
    return batch.inputs.row(b);
}

inline double log_sum_exp(const Vec& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

inline void validate_batch(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    validate_spec(spec);
    if (w.size() != param_count(spec))
        throw ValidationError("parameter vector has dim " + std::to_string(w.size()) +
                              ", spec expects " + std::to_string(param_count(spec)));
    const int n_out = spec.widths.back();
    if (batch.kind == TaskKind::sequence) {
        if (spec.arch != Architecture::seq_model)
            throw ValidationError("sequence batch requires seq_model architecture");
        if (batch.labels.size() != batch.sequences.size())
            throw ValidationError("sequence batch: labels/sequences count mismatch");
    } else {
        if (spec.arch == Architecture::seq_model)
            throw ValidationError("seq_model requires a sequence batch");
        if (batch.inputs.cols != static_cast<std::size_t>(spec.widths.front()))
            throw ValidationError("batch features " + std::to_string(batch.inputs.cols) +
                                  " != model input width " + std::to_string(spec.widths.front()));
        if (batch.kind == TaskKind::regression) {
            if (batch.targets.rows != batch.inputs.rows ||
                batch.targets.cols != static_cast<std::size_t>(n_out))
                throw ValidationError("regression batch: target shape mismatch");
        } else if (batch.labels.size() != batch.inputs.rows) {
            throw ValidationError("classification batch: labels/inputs count mismatch");
        }
    }
    if (batch.kind != TaskKind::regression)
        for (int label : batch.labels)
            if (label < 0 || label >= n_out)
                throw ValidationError("label " + std::to_string(label) + " outside output range " +
                                      std::to_string(n_out));
    if (batch.size() == 0) throw ValidationError("empty batch");
}

}  // namespace detail

inline double loss(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    detail::validate_batch(w, batch, spec);
    const auto layers = detail::layer_views(w, spec);
    const std::size_t n = batch.size();
    std::vector<Vec> acts;
    double total = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        detail::forward(layers, spec.activation, detail::example_input(w, spec, batch, b), acts);
        const Vec& out = acts.back();
        if (batch.kind == TaskKind::regression) {
            for (std::size_t j = 0; j < out.size(); ++j) {
                const double r = out[j] - batch.targets(b, j);
                total += r * r;
            }
        } else {
            total += detail::log_sum_exp(out) - out[batch.labels[b]];
        }
    }
    return total / static_cast<double>(n);
}

inline Vec loss_grad(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    detail::validate_batch(w, batch, spec);
    const auto layers = detail::layer_views(w, spec);
    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vec grad(w.size(), 0.0);

    std::vector<Vec> acts;
    for (std::size_t b = 0; b < n; ++b) {
        Vec input;
        std::size_t pool_start = 0;
        if (spec.arch == Architecture::seq_model)
            input = detail::pool_sequence(w, spec, batch.sequences[b], &pool_start);
        else
            input = batch.inputs.row(b);
        detail::forward(layers, spec.activation, input, acts);

        // head delta
        Vec delta = acts.back();
        if (batch.kind == TaskKind::regression) {
            for (std::size_t j = 0; j < delta.size(); ++j)
                delta[j] = 2.0 * (delta[j] - batch.targets(b, j)) * inv_n;
        } else {
            const double lse = detail::log_sum_exp(acts.back());
            for (std::size_t j = 0; j < delta.size(); ++j)
                delta[j] = std::exp(acts.back()[j] - lse) * inv_n;
            delta[batch.labels[b]] -= inv_n;
        }

        std::size_t offset = w.size();
        for (std::size_t l = layers.size(); l-- > 0;) {
            const detail::LayerView& lv = layers[l];
            offset -= static_cast<std::size_t>(lv.in) * lv.out + lv.out;
            double* gw = grad.data() + offset;
            double* gb = gw + static_cast<std::size_t>(lv.in) * lv.out;
            const Vec&layer_in = acts[l];
            for (int o = 0; o < lv.out; ++o) {
                const double d = delta[o];
                double* grow = gw + static_cast<std::size_t>(o) * lv.in;
                for (int i = 0; i < lv.in; ++i) grow[i] += d * layer_in[i];
                gb[o] += d;
            }
            if (l > 0 || spec.arch == Architecture::seq_model) {
                Vec prev(lv.in, 0.0);
                for (int o = 0; o < lv.out; ++o) {
                    const double d = delta[o];
                    const double* wrow = lv.weights + static_cast<std::size_t>(o) * lv.in;
                    for (int i = 0; i < lv.in; ++i) prev[i] += wrow[i] * d;
                }
                if (l > 0)
                    for (int i = 0; i < lv.in; ++i)
                        prev[i] *= detail::activate_deriv(acts[l][i], spec.activation);
                delta = std::move(prev);
            }
        }

        if (spec.arch == Architecture::seq_model) {
            const auto& tokens = batch.sequences[b];
            const double share = 1.0 / static_cast<double>(tokens.size() - pool_start);
            for (std::size_t t = pool_start; t < tokens.size(); ++t) {
                double* grow = grad.data() + static_cast<std::size_t>(tokens[t]) * spec.widths[0];
                for (int j = 0; j < spec.widths[0]; ++j) grow[j] += share * delta[j];
            }
        }
    }
    return grad;
}

// Raw model outputs (linear head), one row per example.
inline Matrix predict_outputs(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    detail::validate_batch(w, batch, spec);
    const auto layers = detail::layer_views(w, spec);
    Matrix out(batch.size(), spec.widths.back());
    std::vector<Vec> acts;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        detail::forward(layers, spec.activation, detail::example_input(w, spec, batch, b), acts);
        for (std::size_t j = 0; j < acts.back().size(); ++j) out(b, j) = acts.back()[j];
    }
    return out;
}

// Argmax class per example; ties break toward the lowest class index.
inline std::vector<int> predict_classes(const Vec& w, const TaskBatch& batch,
                                        const ModelSpec& spec) {
    if (batch.kind == TaskKind::regression)
        throw ValidationError("predict_classes: not defined for regression batches");
    const Matrix logits = predict_outputs(w, batch, spec);
    std::vector<int> classes(logits.rows);
    for (std::size_t b = 0; b < logits.rows; ++b) {
        int best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (logits(b, j) > logits(b, best)) best = static_cast<int>(j);
        classes[b] = best;
    }
    return classes;
}

inline double accuracy(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    if (batch.kind == TaskKind::regression)
        throw ValidationError("accuracy: not defined for regression batches");
    const std::vector<int> predicted = predict_classes(w, batch, spec);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < predicted.size(); ++b)
        if (predicted[b] == batch.labels[b]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

// exp(mean token cross-entropy); shares the exact reduction with loss().
inline double perplexity(const Vec& w, const TaskBatch& batch, const ModelSpec& spec) {
    if (batch.kind != TaskKind::sequence)
        throw ValidationError("perplexity: defined only for sequence batches");
    return std::exp(loss(w, batch, spec));
}

}  // namespace cagm
