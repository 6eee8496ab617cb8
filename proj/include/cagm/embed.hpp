#pragma once

// Context embeddings.
//
// The pipeline: PCA projections of input features give the target embedding
// e_t(x); a supplementary MLP G(x; theta) is trained to imitate them and then
// produces the context embedding e_c(x); a fixed seeded orthonormal row
// projection maps the flattened model parameters into the same space,
// e_m(w) = P w. The optimizer's alignment term pulls e_m(w) toward e_c(x)
// through penalty(w) = ||e_c - P w||^2 with the closed-form gradient
// 2 P^T (P w - e_c).
//
// Hierarchical mode keeps K nets and K projections of strictly decreasing
// dimension d_1 > ... > d_K >= 1, each level trained against a d_k-component
// PCA of the same data.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cagm/error.hpp"
#include "cagm/linalg.hpp"
#include "cagm/models.hpp"
#include "cagm/pca.hpp"
#include "cagm/prng.hpp"

namespace cagm {

struct ContextEmbedding {
    Vec values;
    int level = 1;
};

struct EmbedNet {
    Vec theta;       // flattened parameters of the supplementary MLP
    ModelSpec spec;  // mlp_regressor, n_features -> d_e

    int output_dim() const { return spec.widths.back(); }
};

inline EmbedNet make_embed_net(int n_features, const std::vector<int>& hidden, int d_e,
                               Activation act, std::uint64_t seed) {
    if (n_features <= 0 || d_e <= 0) throw ValidationError("make_embed_net: bad dimensions");
    ModelSpec spec;
    spec.arch = Architecture::mlp_regressor;
    spec.widths.push_back(n_features);
    for (int h : hidden) spec.widths.push_back(h);
    spec.widths.push_back(d_e);
    spec.activation = act;
    spec.seed = seed;
    return EmbedNet{init_params(spec), spec};
}

// e_t(x): PCA projection of the input features.
inline ContextEmbedding target_embedding(const PcaModel& pca, const Vec& x) {
    return ContextEmbedding{pca_project(pca, x), 1};
}

// e_c(x) = G(x; theta).
inline ContextEmbedding context_embedding(const EmbedNet& net, const Vec& x) {
    if (x.size() != static_cast<std::size_t>(net.spec.widths.front()))
        throw ValidationError("context_embedding: input dim " + std::to_string(x.size()) +
                              " != net input " + std::to_string(net.spec.widths.front()));
    const auto layers = detail::layer_views(net.theta, net.spec);
    std::vector<Vec> acts;
    detail::forward(layers, net.spec.activation, x, acts);
    return ContextEmbedding{acts.back(), 1};
}

struct EmbedTrainResult {
    EmbedNet net;
    double final_objective = 0.0;
    std::vector<double> objective_trace;  // objective before each step, then final
};

// Builds the regression batch whose loss() equals the empirical mean of
// ||G(x; theta) - e_t(x)||^2 over the rows of data.
inline TaskBatch embed_training_batch(const Matrix& data, const PcaModel& pca) {
    TaskBatch batch;
    batch.kind = TaskKind::regression;
    batch.inputs = data;
    batch.targets = Matrix(data.rows, pca.components.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        const Vec t = pca_project(pca, data.row(i));
        for (std::size_t j = 0; j < t.size(); ++j) batch.targets(i, j) = t[j];
    }
    return batch;
}

// Plain gradient descent on mean_x ||G(x;theta) - e_t(x)||^2.
inline EmbedTrainResult train_embed_net(EmbedNet net, const Matrix& data, const PcaModel& pca,
                                        int steps, double lr) {
    if (steps < 1) throw ValidationError("train_embed_net: steps must be >= 1");
    if (lr <= 0.0) throw ValidationError("train_embed_net: lr must be positive");
    if (static_cast<std::size_t>(net.output_dim()) != pca.components.rows)
        throw ValidationError("train_embed_net: net output dim " +
                              std::to_string(net.output_dim()) + " != pca components " +
                              std::to_string(pca.components.rows));
    const TaskBatch batch = embed_training_batch(data, pca);

    EmbedTrainResult result;
    result.objective_trace.reserve(static_cast<std::size_t>(steps) + 1);
    for (int step = 0; step < steps; ++step) {
        const double objective = loss(net.theta, batch, net.spec);
        if (!std::isfinite(objective))
            throw NumericError("train_embed_net: objective diverged at step " +
                               std::to_string(step));
        result.objective_trace.push_back(objective);
        axpy(-lr, loss_grad(net.theta, batch, net.spec), net.theta);
    }
    result.final_objective = loss(net.theta, batch, net.spec);
    if (!std::isfinite(result.final_objective))
        throw NumericError("train_embed_net: objective diverged at step " +
                           std::to_string(steps));
    result.objective_trace.push_back(result.final_objective);
    result.net = std::move(net);
    return result;
}

// e_{c,k}(x) for k = 1..K. Level dimensions must be strictly decreasing.
inline std::vector<ContextEmbedding> hierarchical_embeddings(const std::vector<EmbedNet>& nets,
                                                             const Vec& x) {
    if (nets.empty()) throw ValidationError("hierarchical_embeddings: need at least one level");
    for (std::size_t k = 1; k < nets.size(); ++k)
        if (nets[k].output_dim() >= nets[k - 1].output_dim())
            throw ValidationError("hierarchical_embeddings: level dims must strictly decrease");
    std::vector<ContextEmbedding> levels;
    levels.reserve(nets.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        ContextEmbedding e = context_embedding(nets[k], x);
        e.level = static_cast<int>(k) + 1;
        levels.push_back(std::move(e));
    }
    return levels;
}

// Fixed random linear projection of parameter space into embedding space,
// orthonormal rows, fully determined by (seed, level index).
struct ManifoldMap {
    std::vector<Matrix> levels;  // level k: d_k x d, orthonormal rows

    const Matrix& flat() const { return levels.front(); }
    std::size_t param_dim() const { return levels.front().cols; }
};

namespace detail {

// Gram-Schmidt with one re-orthogonalization pass.
inline void orthonormalize_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        Vec row = m.row(r);
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t p = 0; p < r; ++p) {
                const Vec prev = m.row(p);
                axpy(-dot(row, prev), prev, row);
            }
        const double n = norm2(row);
        if (n < 1e-12) throw NumericError("orthonormalize_rows: rank deficiency at row " +
                                          std::to_string(r));
        for (std::size_t j = 0; j < m.cols; ++j) m(r, j) = row[j] / n;
    }
}

}  // namespace detail

inline ManifoldMap make_manifold_map(std::size_t param_dim, const std::vector<int>& level_dims,
                                     std::uint64_t seed) {
    if (level_dims.empty()) throw ValidationError("make_manifold_map: need at least one level");
    ManifoldMap map;
    for (std::size_t k = 0; k < level_dims.size(); ++k) {
        const int d_k = level_dims[k];
        if (d_k < 1) throw ValidationError("make_manifold_map: level dim must be >= 1");
        if (static_cast<std::size_t>(d_k) > param_dim)
            throw ValidationError("make_manifold_map: level dim " + std::to_string(d_k) +
                                  " exceeds parameter dim " + std::to_string(param_dim));
        if (k > 0 && d_k >= level_dims[k - 1])
            throw ValidationError("make_manifold_map: level dims must strictly decrease");
        Xoshiro256pp rng(derive_seed(seed, 0x3a90 + k));
        Matrix p(static_cast<std::size_t>(d_k), param_dim);
        for (double& v : p.data) v = rng.gaussian();
        detail::orthonormalize_rows(p);
        map.levels.push_back(std::move(p));
    }
    return map;
}

// e_m(w) = P_k w for hierarchy level (1-based).
inline ContextEmbedding model_embedding(const ManifoldMap& map, const Vec& w, int level = 1) {
    if (level < 1 || static_cast<std::size_t>(level) > map.levels.size())
        throw ValidationError("model_embedding: level out of range");
    const Matrix& p = map.levels[static_cast<std::size_t>(level - 1)];
    if (w.size() != p.cols)
        throw ValidationError("model_embedding: parameter dim " + std::to_string(w.size()) +
                              " != map dim " + std::to_string(p.cols));
    return ContextEmbedding{matvec(p, w), level};
}

// ||e_c - P w||^2
inline double alignment_penalty(const ManifoldMap& map, const Vec& w, const ContextEmbedding& e_c) {
    const ContextEmbedding e_m = model_embedding(map, w, e_c.level);
    if (e_c.values.size() != e_m.values.size())
        throw ValidationError("alignment_penalty: embedding dim mismatch");
    const Vec r = sub(e_c.values, e_m.values);
    return dot(r, r);
}

// 2 P^T (P w - e_c), exact.
inline Vec alignment_grad(const ManifoldMap& map, const Vec& w, const ContextEmbedding& e_c) {
    const ContextEmbedding e_m = model_embedding(map, w, e_c.level);
    if (e_c.values.size() != e_m.values.size())
        throw ValidationError("alignment_grad: embedding dim mismatch");
    const Matrix& p = map.levels[static_cast<std::size_t>(e_c.level - 1)];
    return scale(matvec_t(p, sub(e_m.values, e_c.values)), 2.0);
}

}  // namespace cagm
