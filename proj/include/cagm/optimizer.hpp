#pragma once

// The optimizer core: context-regularized update step, Hessian-diagonal
// metric tensor, discrete geodesics with energy relaxation, and the
// squared-curvature regularizer.
//
// Update rule (descent mode, the default):
//   w' = w - eta * (grad L  +  lambda * grad A  +  grad R)
// where A(w) = sum_k beta_k ||e_{c,k} - P_k w||^2 and R(w) = mu * sum_i H_ii^2
// (R's gradient already carries mu). Literal mode flips the alignment term
// instead: it enters with a positive sign and without the learning-rate
// factor, w' = w - eta * (grad L + grad R) + lambda * grad A. Curvature
// handling is shared, so the two modes coincide exactly when lambda = 0.
//
// The metric is the diagonal M_ii = d2L/dw_i^2 + gamma, estimated by second
// central differences and clamped below at gamma * 1e-3 so indefinite
// curvature never produces a non-positive metric.
//
// Everything here operates on a Problem (loss + analytic gradient callbacks),
// which decouples the optimizer from any particular model; overloads taking
// (batch, spec) bind the callbacks to the models module.

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cagm/embed.hpp"
#include "cagm/error.hpp"
#include "cagm/linalg.hpp"
#include "cagm/models.hpp"

namespace cagm {

// A differentiable objective bound to its data. grad must be the analytic
// gradient of loss; fd_gradient is the oracle for that claim, never a
// substitute inside the optimizer.
struct Problem {
    std::function<double(const Vec&)> loss;
    std::function<Vec(const Vec&)> grad;
};

inline Problem model_problem(TaskBatch batch, ModelSpec spec) {
    auto bound = std::make_shared<std::pair<TaskBatch, ModelSpec>>(std::move(batch),
                                                                   std::move(spec));
    return Problem{
        [bound](const Vec& w) { return loss(w, bound->first, bound->second); },
        [bound](const Vec& w) { return loss_grad(w, bound->first, bound->second); }};
}

enum class SignMode { descent, literal };

struct OptimizerConfig {
    double eta = 0.05;    // learning rate
    double lambda = 0.0;  // alignment coefficient
    double mu = 0.0;      // curvature coefficient (lives inside R)
    double gamma = 0.01;  // metric stability factor
    SignMode sign_mode = SignMode::descent;
    bool use_alignment = true;
    bool use_curvature = true;
    bool use_hierarchy = false;
    double hess_fd_step = kFdHessStep;  // h for Hessian diagonals
    double curv_fd_step = kFdHessStep;  // outer step for grad R
    int curvature_dim_cap = 256;        // grad R costs O(d^2) loss evaluations

    void validate() const {
        if (eta <= 0.0) throw ValidationError("OptimizerConfig: eta must be positive");
        if (gamma <= 0.0) throw ValidationError("OptimizerConfig: gamma must be positive");
        if (lambda < 0.0) throw ValidationError("OptimizerConfig: lambda must be >= 0");
        if (mu < 0.0) throw ValidationError("OptimizerConfig: mu must be >= 0");
        if (hess_fd_step <= 0.0 || curv_fd_step <= 0.0)
            throw ValidationError("OptimizerConfig: fd steps must be positive");
        if (curvature_dim_cap < 1)
            throw ValidationError("OptimizerConfig: curvature_dim_cap must be >= 1");
    }

    bool alignment_active() const { return use_alignment && lambda > 0.0; }
    bool curvature_active() const { return use_curvature && mu > 0.0; }
};

// Per-batch context for the alignment term: one embedding per hierarchy level
// (callers average per-example embeddings over the batch) plus level weights
// beta_k >= 0 summing to 1. The flat case is K = 1 with beta = {1}.
struct AlignmentContext {
    std::vector<ContextEmbedding> levels;
    std::vector<double> weights;

    static AlignmentContext flat(ContextEmbedding e_c) {
        return AlignmentContext{{std::move(e_c)}, {1.0}};
    }

    static std::vector<double> uniform_weights(std::size_t k) {
        return std::vector<double>(k, 1.0 / static_cast<double>(k));
    }

    void validate(const ManifoldMap& map) const {
        if (levels.empty()) throw ValidationError("AlignmentContext: no levels");
        if (levels.size() != weights.size())
            throw ValidationError("AlignmentContext: weights/levels count mismatch");
        if (levels.size() > map.levels.size())
            throw ValidationError("AlignmentContext: more levels than manifold maps");
        double sum = 0.0;
        for (double b : weights) {
            if (b < 0.0) throw ValidationError("AlignmentContext: weights must be >= 0");
            sum += b;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("AlignmentContext: weights must sum to 1");
    }
};

struct MetricDiag {
    Vec values;  // every entry strictly positive
};

inline MetricDiag metric_tensor(const Vec& w, const Problem& problem, double gamma,
                                double h = kFdHessStep) {
    if (gamma <= 0.0) throw ValidationError("metric_tensor: gamma must be positive");
    Vec values;
    try {
        values = fd_hessian_diag(problem.loss, w, h);
    } catch (const NumericError& e) {
        throw NumericError(std::string("metric_tensor: ") + e.what());
    }
    const double floor = gamma * 1e-3;
    for (double& v : values) v = std::max(v + gamma, floor);
    return MetricDiag{std::move(values)};
}

inline MetricDiag metric_tensor(const Vec& w, const TaskBatch& batch, const ModelSpec& spec,
                                double gamma, double h = kFdHessStep) {
    return metric_tensor(w, model_problem(batch, spec), gamma, h);
}

// R(w) = mu * sum_i (d2L/dw_i^2)^2
inline double curvature_reg(const Vec& w, const Problem& problem, double mu,
                            double h = kFdHessStep) {
    if (mu < 0.0) throw ValidationError("curvature_reg: mu must be >= 0");
    if (mu == 0.0) return 0.0;
    const Vec diag = fd_hessian_diag(problem.loss, w, h);
    return mu * dot(diag, diag);
}

inline double curvature_reg(const Vec& w, const TaskBatch& batch, const ModelSpec& spec,
                            double mu, double h = kFdHessStep) {
    return curvature_reg(w, model_problem(batch, spec), mu, h);
}

// grad R by central differences over R itself; exact third derivatives are
// out of scope. Cost is O(d^2) loss evaluations, hence the dimension cap.
inline Vec curvature_reg_grad(const Vec& w, const Problem& problem, double mu,
                              double hess_h = kFdHessStep, double outer_h = kFdHessStep,
                              int dim_cap = 256) {
    if (mu < 0.0) throw ValidationError("curvature_reg_grad: mu must be >= 0");
    if (mu == 0.0) return Vec(w.size(), 0.0);
    if (w.size() > static_cast<std::size_t>(dim_cap))
        throw ValidationError(
            "curvature_reg_grad: parameter dim " + std::to_string(w.size()) + " exceeds cap " +
            std::to_string(dim_cap) + "; disable the curvature term for models this large");
    return fd_gradient([&](const Vec& p) { return curvature_reg(p, problem, mu, hess_h); }, w,
                       outer_h);
}

inline Vec curvature_reg_grad(const Vec& w, const TaskBatch& batch, const ModelSpec& spec,
                              double mu, double hess_h = kFdHessStep,
                              double outer_h = kFdHessStep, int dim_cap = 256) {
    return curvature_reg_grad(w, model_problem(batch, spec), mu, hess_h, outer_h, dim_cap);
}

namespace detail {

inline double alignment_term(const ManifoldMap& map, const Vec& w, const AlignmentContext& ctx) {
    double a = 0.0;
    for (std::size_t k = 0; k < ctx.levels.size(); ++k)
        a += ctx.weights[k] * alignment_penalty(map, w, ctx.levels[k]);
    return a;
}

inline Vec alignment_term_grad(const ManifoldMap& map, const Vec& w,
                               const AlignmentContext& ctx) {
    Vec g(w.size(), 0.0);
    for (std::size_t k = 0; k < ctx.levels.size(); ++k)
        axpy(ctx.weights[k], alignment_grad(map, w, ctx.levels[k]), g);
    return g;
}

inline void require_finite(const Vec& v, const char* term) {
    if (!all_finite(v))
        throw NumericError(std::string("cagm_step: non-finite gradient in ") + term + " term");
}

}  // namespace detail

// L + lambda * A + R with ablation flags respected: the scalar whose descent
// the default step performs.
inline double combined_objective(const Vec& w, const Problem& problem,
                                 const AlignmentContext& ctx, const OptimizerConfig& cfg,
                                 const ManifoldMap& map) {
    cfg.validate();
    double value = problem.loss(w);
    if (cfg.alignment_active()) {
        ctx.validate(map);
        value += cfg.lambda * detail::alignment_term(map, w, ctx);
    }
    if (cfg.curvature_active()) value += curvature_reg(w, problem, cfg.mu, cfg.hess_fd_step);
    return value;
}

inline double combined_objective(const Vec& w, const TaskBatch& batch,
                                 const AlignmentContext& ctx, const OptimizerConfig& cfg,
                                 const ManifoldMap& map, const ModelSpec& spec) {
    return combined_objective(w, model_problem(batch, spec), ctx, cfg, map);
}

// One plain SGD step, the baseline path. Kept separate from cagm_step so the
// lambda = mu = 0 reduction can be checked against genuinely different code.
inline Vec sgd_step(const Vec& w, const TaskBatch& batch, const ModelSpec& spec, double eta) {
    if (eta <= 0.0) throw ValidationError("sgd_step: eta must be positive");
    Vec next = w;
    axpy(-eta, loss_grad(w, batch, spec), next);
    return next;
}

// One context-aware update. Disabled or zero-coefficient terms are skipped
// outright, so the degenerate configuration is bit-identical to plain SGD.
inline Vec cagm_step(const Vec& w, const Problem& problem, const AlignmentContext& ctx,
                     const OptimizerConfig& cfg, const ManifoldMap& map) {
    cfg.validate();
    const Vec g_loss = problem.grad(w);
    detail::require_finite(g_loss, "loss");

    Vec next = w;
    axpy(-cfg.eta, g_loss, next);

    if (cfg.curvature_active()) {
        const Vec g_curv = curvature_reg_grad(w, problem, cfg.mu, cfg.hess_fd_step,
                                              cfg.curv_fd_step, cfg.curvature_dim_cap);
        detail::require_finite(g_curv, "curvature");
        axpy(-cfg.eta, g_curv, next);
    }

    if (cfg.alignment_active()) {
        ctx.validate(map);
        const Vec g_align = detail::alignment_term_grad(map, w, ctx);
        detail::require_finite(g_align, "alignment");
        if (cfg.sign_mode == SignMode::descent)
            axpy(-cfg.eta * cfg.lambda, g_align, next);
        else
            axpy(cfg.lambda, g_align, next);
    }
    return next;
}

inline Vec cagm_step(const Vec& w, const TaskBatch& batch, const AlignmentContext& ctx,
                     const OptimizerConfig& cfg, const ManifoldMap& map, const ModelSpec& spec) {
    return cagm_step(w, model_problem(batch, spec), ctx, cfg, map);
}

struct GeodesicPath {
    std::vector<Vec> points;           // N+1 points, endpoints pinned
    double length = 0.0;               // sum_j sqrt(dw_j^T M(mid_j) dw_j)
    std::vector<double> energy_trace;  // discrete energy per iterate, non-increasing
};

namespace detail {

inline MetricDiag midpoint_metric(const Vec& a, const Vec& b, const Problem& problem,
                                  double gamma, double h) {
    Vec mid(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
    return metric_tensor(mid, problem, gamma, h);
}

inline double path_energy(const std::vector<Vec>& pts, const std::vector<MetricDiag>& metrics) {
    double e = 0.0;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < pts[j].size(); ++i) {
            const double d = pts[j + 1][i] - pts[j][i];
            s += d * metrics[j].values[i] * d;
        }
        e += s;
    }
    return e;
}

inline std::vector<MetricDiag> segment_metrics(const std::vector<Vec>& pts,
                                               const Problem& problem, double gamma, double h) {
    std::vector<MetricDiag> metrics;
    metrics.reserve(pts.size() - 1);
    for (std::size_t j = 0; j + 1 < pts.size(); ++j)
        metrics.push_back(midpoint_metric(pts[j], pts[j + 1], problem, gamma, h));
    return metrics;
}

}  // namespace detail

// Discretizes the length functional on N segments, initializes at the chord,
// and relaxes interior points by gradient descent on the elastic energy
// E = sum_j dw_j^T M(mid_j) dw_j with the metric frozen per iteration and a
// step-halving line search on the true energy, so E never increases.
inline GeodesicPath geodesic_path(const Vec& w_a, const Vec& w_b, const Problem& problem,
                                  double gamma, int segments = 16, int iters = 30,
                                  double step = 0.1, double h = kFdHessStep) {
    if (w_a.size() != w_b.size()) throw ValidationError("geodesic_path: endpoint dim mismatch");
    if (segments < 1) throw ValidationError("geodesic_path: need at least one segment");
    if (iters < 0 || step <= 0.0) throw ValidationError("geodesic_path: bad relaxation controls");
    const std::size_t n = static_cast<std::size_t>(segments);
    const std::size_t dim = w_a.size();

    GeodesicPath path;
    path.points.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(n);
        path.points[j].resize(dim);
        for (std::size_t i = 0; i < dim; ++i)
            path.points[j][i] = (1.0 - t) * w_a[i] + t * w_b[i];
    }

    std::vector<MetricDiag> metrics = detail::segment_metrics(path.points, problem, gamma, h);
    double energy = detail::path_energy(path.points, metrics);
    if (!std::isfinite(energy)) throw NumericError("geodesic_path: non-finite initial energy");
    path.energy_trace.push_back(energy);

    for (int iter = 0; iter < iters && n >= 2; ++iter) {
        // elastic gradient wrt interior points, metric frozen
        std::vector<Vec> grad(n - 1, Vec(dim, 0.0));
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = 0; i < dim; ++i)
                grad[j - 1][i] = 2.0 * metrics[j - 1].values[i] *
                                     (path.points[j][i] - path.points[j - 1][i]) -
                                 2.0 * metrics[j].values[i] *
                                     (path.points[j + 1][i] - path.points[j][i]);

        double alpha = step;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving) {
            std::vector<Vec> candidate = path.points;
            for (std::size_t j = 1; j < n; ++j) axpy(-alpha, grad[j - 1], candidate[j]);
            std::vector<MetricDiag> cand_metrics =
                detail::segment_metrics(candidate, problem, gamma, h);
            const double cand_energy = detail::path_energy(candidate, cand_metrics);
            if (!std::isfinite(cand_energy))
                throw NumericError("geodesic_path: non-finite energy during relaxation");
            if (cand_energy < energy) {
                path.points = std::move(candidate);
                metrics = std::move(cand_metrics);
                energy = cand_energy;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        path.energy_trace.push_back(energy);
        if (!accepted) break;  // converged: no step improves the energy
    }

    path.length = 0.0;
    for (std::size_t j = 0; j + 1 < path.points.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = path.points[j + 1][i] - path.points[j][i];
            s += d * metrics[j].values[i] * d;
        }
        path.length += std::sqrt(s);
    }
    return path;
}

inline GeodesicPath geodesic_path(const Vec& w_a, const Vec& w_b, const TaskBatch& batch,
                                  const ModelSpec& spec, double gamma, int segments = 16,
                                  int iters = 30, double step = 0.1, double h = kFdHessStep) {
    return geodesic_path(w_a, w_b, model_problem(batch, spec), gamma, segments, iters, step, h);
}

struct GeodesicDiagnostics {
    double geodesic_length = 0.0;
    double straight_line_length = 0.0;
    double ratio = 1.0;  // <= 1 + 1e-6: relaxation starts at the chord and never increases energy
};

inline GeodesicDiagnostics geodesic_diagnostics(const GeodesicPath& path, const Vec& w_a,
                                                const Vec& w_b, const Problem& problem,
                                                double gamma, double h = kFdHessStep) {
    if (path.points.size() < 2) throw ValidationError("geodesic_diagnostics: degenerate path");
    const std::size_t n = path.points.size() - 1;
    const std::size_t dim = w_a.size();

    std::vector<Vec> chord(n + 1, Vec(dim));
    for (std::size_t j = 0; j <= n; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(n);
        for (std::size_t i = 0; i < dim; ++i) chord[j][i] = (1.0 - t) * w_a[i] + t * w_b[i];
    }
    const std::vector<MetricDiag> metrics = detail::segment_metrics(chord, problem, gamma, h);

    GeodesicDiagnostics diag;
    diag.geodesic_length = path.length;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = chord[j + 1][i] - chord[j][i];
            s += d * metrics[j].values[i] * d;
        }
        diag.straight_line_length += std::sqrt(s);
    }
    diag.ratio = diag.straight_line_length == 0.0
                     ? 1.0
                     : diag.geodesic_length / diag.straight_line_length;
    return diag;
}

inline GeodesicDiagnostics geodesic_diagnostics(const GeodesicPath& path, const Vec& w_a,
                                                const Vec& w_b, const TaskBatch& batch,
                                                const ModelSpec& spec, double gamma,
                                                double h = kFdHessStep) {
    return geodesic_diagnostics(path, w_a, w_b, model_problem(batch, spec), gamma, h);
}

}  // namespace cagm
