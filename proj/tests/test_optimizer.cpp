#include <gtest/gtest.h>

#include <cmath>

#include "cagm/embed.hpp"
#include "cagm/linalg.hpp"
#include "cagm/optimizer.hpp"
#include "cagm/prng.hpp"

namespace {

using cagm::AlignmentContext;
using cagm::ContextEmbedding;
using cagm::ManifoldMap;
using cagm::Matrix;
using cagm::ModelSpec;
using cagm::OptimizerConfig;
using cagm::Problem;
using cagm::SignMode;
using cagm::TaskBatch;
using cagm::TaskKind;
using cagm::Vec;

// L(w) = 1/2 sum_i c_i w_i^2
Problem quadratic_problem(Vec coeffs) {
    return Problem{[coeffs](const Vec& w) {
                       double s = 0.0;
                       for (std::size_t i = 0; i < w.size(); ++i) s += coeffs[i] * w[i] * w[i];
                       return 0.5 * s;
                   },
                   [coeffs](const Vec& w) {
                       Vec g(w.size());
                       for (std::size_t i = 0; i < w.size(); ++i) g[i] = coeffs[i] * w[i];
                       return g;
                   }};
}

Problem linear_problem(Vec slope) {
    return Problem{[slope](const Vec& w) { return cagm::dot(slope, w); },
                   [slope](const Vec&) { return slope; }};
}

ManifoldMap coordinate_map(std::size_t d_e, std::size_t d) {
    ManifoldMap map;
    map.levels.push_back(Matrix(d_e, d));
    for (std::size_t i = 0; i < d_e; ++i) map.levels[0](i, i) = 1.0;
    return map;
}

AlignmentContext empty_context() { return AlignmentContext::flat(ContextEmbedding{Vec{0.0}, 1}); }

OptimizerConfig plain_config(double eta) {
    OptimizerConfig cfg;
    cfg.eta = eta;
    cfg.lambda = 0.0;
    cfg.mu = 0.0;
    cfg.use_alignment = false;
    cfg.use_curvature = false;
    return cfg;
}

ModelSpec small_classifier(std::uint64_t seed) {
    ModelSpec spec;
    spec.arch = cagm::Architecture::mlp_classifier;
    spec.widths = {3, 5, 2};
    spec.seed = seed;
    return spec;
}

TaskBatch random_classification(const ModelSpec& spec, std::size_t n, cagm::Xoshiro256pp& rng) {
    TaskBatch batch;
    batch.kind = TaskKind::classification;
    batch.inputs = Matrix(n, static_cast<std::size_t>(spec.widths.front()));
    for (double& v : batch.inputs.data) v = rng.gaussian();
    for (std::size_t i = 0; i < n; ++i)
        batch.labels.push_back(
            static_cast<int>(rng.bounded(static_cast<std::uint64_t>(spec.widths.back()))));
    return batch;
}

TEST(CagmStep, ReducesToSgdBitExactly) {
    const ModelSpec spec = small_classifier(5);
    const Vec w = cagm::init_params(spec);
    cagm::Xoshiro256pp rng(6);
    const TaskBatch batch = random_classification(spec, 8, rng);

    const OptimizerConfig cfg = plain_config(0.07);
    const ManifoldMap map = cagm::make_manifold_map(w.size(), {2}, 3);
    const Vec via_cagm = cagm::cagm_step(w, batch, empty_context(), cfg, map, spec);
    const Vec via_sgd = cagm::sgd_step(w, batch, spec, 0.07);
    ASSERT_EQ(via_cagm.size(), via_sgd.size());
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(via_cagm[i], via_sgd[i]);
}

// L = 1/2 ||w||^2, w = (1,0), eta = 0.1, lambda = 0: one step lands on (0.9, 0)
TEST(CagmStep, HandSgdStepOnQuadratic) {
    const Problem problem = quadratic_problem(Vec{1.0, 1.0});
    const ManifoldMap map = coordinate_map(1, 2);
    const Vec next = cagm::cagm_step(Vec{1.0, 0.0}, problem, empty_context(),
                                     plain_config(0.1), map);
    EXPECT_NEAR(next[0], 0.9, 1e-15);
    EXPECT_NEAR(next[1], 0.0, 1e-15);
}

// descent mode worked case: L = 1/2 ||w||^2, d=2, d_e=1, P=(1,0), e_c=(0.5),
// w=(1,0), eta=0.1, lambda=0.1, mu=0 -> w - 0.1*((1,0) + 0.1*(1,0)) = (0.89, 0)
TEST(CagmStep, HandWorkedDescentCase) {
    const Problem problem = quadratic_problem(Vec{1.0, 1.0});
    const ManifoldMap map = coordinate_map(1, 2);
    OptimizerConfig cfg;
    cfg.eta = 0.1;
    cfg.lambda = 0.1;
    cfg.mu = 0.0;
    cfg.use_curvature = false;
    const AlignmentContext ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.5}, 1});

    const Vec next = cagm::cagm_step(Vec{1.0, 0.0}, problem, ctx, cfg, map);
    EXPECT_NEAR(next[0], 0.89, 1e-12);
    EXPECT_NEAR(next[1], 0.0, 1e-12);

    // every term cross-checked against the fd gradient of the combined objective
    const Vec fd = cagm::fd_gradient(
        [&](const Vec& p) { return cagm::combined_objective(p, problem, ctx, cfg, map); },
        Vec{1.0, 0.0}, 1e-6);
    EXPECT_NEAR(fd[0], 1.1, 1e-6);
    EXPECT_NEAR(fd[1], 0.0, 1e-6);
}

// literal mode on the same instance adds the alignment term positively and
// unscaled: w - eta grad L + lambda grad A = (1 - 0.1*1 + 0.1*1, 0) = (1.0, 0)
TEST(CagmStep, LiteralModePositiveUnscaledAlignment) {
    const Problem problem = quadratic_problem(Vec{1.0, 1.0});
    const ManifoldMap map = coordinate_map(1, 2);
    OptimizerConfig cfg;
    cfg.eta = 0.1;
    cfg.lambda = 0.1;
    cfg.mu = 0.0;
    cfg.use_curvature = false;
    cfg.sign_mode = SignMode::literal;
    const AlignmentContext ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.5}, 1});

    const Vec next = cagm_step(Vec{1.0, 0.0}, problem, ctx, cfg, map);
    EXPECT_NEAR(next[0], 1.0, 1e-12);
    EXPECT_NEAR(next[1], 0.0, 1e-12);
}

TEST(CagmStep, LiteralAndDescentCoincideWithoutAlignment) {
    const Problem problem = quadratic_problem(Vec{2.0, 0.5, 1.0});
    const ManifoldMap map = coordinate_map(1, 3);
    OptimizerConfig descent;
    descent.eta = 0.05;
    descent.lambda = 0.0;
    descent.mu = 0.3;
    OptimizerConfig literal = descent;
    literal.sign_mode = SignMode::literal;

    const Vec w{0.4, -0.8, 1.2};
    const Vec a = cagm::cagm_step(w, problem, empty_context(), descent, map);
    const Vec b = cagm::cagm_step(w, problem, empty_context(), literal, map);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(CagmStep, PermutingBatchOrderIsStable) {
    const ModelSpec spec = small_classifier(15);
    const Vec w = cagm::init_params(spec);
    cagm::Xoshiro256pp rng(16);
    TaskBatch batch = random_classification(spec, 12, rng);
    TaskBatch reversed = batch;
    for (std::size_t i = 0; i < batch.inputs.rows; ++i) {
        const std::size_t r = batch.inputs.rows - 1 - i;
        for (std::size_t j = 0; j < batch.inputs.cols; ++j)
            reversed.inputs(i, j) = batch.inputs(r, j);
        reversed.labels[i] = batch.labels[r];
    }
    const ManifoldMap map = cagm::make_manifold_map(w.size(), {3}, 8);
    OptimizerConfig cfg;
    cfg.eta = 0.05;
    cfg.lambda = 0.2;
    cfg.mu = 0.0;
    cfg.use_curvature = false;
    const AlignmentContext ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.1, -0.2, 0.3}, 1});

    const Vec a = cagm::cagm_step(w, batch, ctx, cfg, map, spec);
    const Vec b = cagm::cagm_step(w, reversed, ctx, cfg, map, spec);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(CagmStep, NamesNonFiniteTerm) {
    Problem bad;
    bad.loss = [](const Vec&) { return 0.0; };
    bad.grad = [](const Vec& w) { return Vec(w.size(), std::nan("")); };
    const ManifoldMap map = coordinate_map(1, 2);
    try {
        cagm::cagm_step(Vec{0.0, 0.0}, bad, empty_context(), plain_config(0.1), map);
        FAIL() << "expected NumericError";
    } catch (const cagm::NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("loss"), std::string::npos);
    }
}

TEST(CombinedObjective, AllFlagsOffEqualsLoss) {
    const ModelSpec spec = small_classifier(31);
    const Vec w = cagm::init_params(spec);
    cagm::Xoshiro256pp rng(32);
    const TaskBatch batch = random_classification(spec, 6, rng);
    const ManifoldMap map = cagm::make_manifold_map(w.size(), {2}, 4);
    OptimizerConfig cfg = plain_config(0.1);
    EXPECT_EQ(cagm::combined_objective(w, batch, empty_context(), cfg, map, spec),
              cagm::loss(w, batch, spec));
}

// fd gradient of the combined objective matches the descent direction * (-1/eta)
TEST(CombinedObjective, FdOracleMatchesStepDirection) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cagm::Xoshiro256pp rng(700 + seed);
        const ModelSpec spec = small_classifier(800 + seed);
        Vec w = cagm::init_params(spec);
        for (double& v : w) v += 0.1 * rng.gaussian();
        const TaskBatch batch = random_classification(spec, 5, rng);
        const ManifoldMap map = cagm::make_manifold_map(w.size(), {3}, 900 + seed);

        OptimizerConfig cfg;
        cfg.eta = 0.05;
        cfg.lambda = 0.15;
        cfg.mu = 0.0;  // grad R is itself fd-based, excluded from this oracle
        cfg.use_curvature = false;
        ContextEmbedding e_c{Vec(3), 1};
        for (double& v : e_c.values) v = rng.gaussian();
        const AlignmentContext ctx = AlignmentContext::flat(e_c);

        const Vec next = cagm::cagm_step(w, batch, ctx, cfg, map, spec);
        Vec step_dir(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) step_dir[i] = (w[i] - next[i]) / cfg.eta;

        const Vec fd = cagm::fd_gradient(
            [&](const Vec& p) {
                return cagm::combined_objective(p, batch, ctx, cfg, map, spec);
            },
            w, 1e-5);
        Vec gap = step_dir;
        for (std::size_t i = 0; i < gap.size(); ++i) gap[i] -= fd[i];
        EXPECT_LE(cagm::norm_inf(gap) / (1.0 + cagm::norm_inf(fd)), 1e-4) << "seed " << seed;
    }
}

TEST(CombinedObjective, MonotoneDecreaseOnConvexQuadratic) {
    const Problem problem = quadratic_problem(Vec{2.0, 4.0});
    const ManifoldMap map = coordinate_map(1, 2);
    OptimizerConfig cfg;
    cfg.eta = 0.1;  // below 2/lambda_max = 0.5 of the combined quadratic
    cfg.lambda = 0.2;
    cfg.mu = 0.0;
    cfg.use_curvature = false;
    const AlignmentContext ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.7}, 1});

    Vec w{1.5, -2.0};
    double prev = cagm::combined_objective(w, problem, ctx, cfg, map);
    for (int step = 0; step < 50; ++step) {
        w = cagm::cagm_step(w, problem, ctx, cfg, map);
        const double value = cagm::combined_objective(w, problem, ctx, cfg, map);
        EXPECT_LT(value, prev + 1e-15);
        prev = value;
    }
}

TEST(MetricTensor, LinearModelGivesGammaIdentity) {
    const Problem problem = linear_problem(Vec{3.0, -2.0, 0.5});
    const auto metric = cagm::metric_tensor(Vec{0.1, 0.2, -0.3}, problem, 0.25);
    for (double v : metric.values) EXPECT_NEAR(v, 0.25, 1e-4);
}

TEST(MetricTensor, QuadraticCase) {
    const Problem problem = quadratic_problem(Vec{2.0, 4.0});
    const auto metric = cagm::metric_tensor(Vec{0.3, -0.1}, problem, 0.01);
    EXPECT_NEAR(metric.values[0], 2.01, 1e-3);
    EXPECT_NEAR(metric.values[1], 4.01, 1e-3);
}

TEST(MetricTensor, StrictlyPositiveOnRandomDraws) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        cagm::Xoshiro256pp rng(1000 + seed);
        const ModelSpec spec = small_classifier(1100 + seed);
        Vec w = cagm::init_params(spec);
        for (double& v : w) v += rng.gaussian();
        const TaskBatch batch = random_classification(spec, 4, rng);
        const auto metric = cagm::metric_tensor(w, batch, spec, 0.01);
        for (double v : metric.values) EXPECT_GT(v, 0.0);
    }
}

TEST(MetricTensor, ClampsIndefiniteCurvature) {
    // concave loss: Hessian diag = -2, far below -gamma
    Problem concave;
    concave.loss = [](const Vec& w) { return -cagm::dot(w, w); };
    concave.grad = [](const Vec& w) { return cagm::scale(w, -2.0); };
    const auto metric = cagm::metric_tensor(Vec{0.5}, concave, 0.01);
    EXPECT_NEAR(metric.values[0], 0.01 * 1e-3, 1e-8);
    EXPECT_GT(metric.values[0], 0.0);
}

TEST(CurvatureReg, LinearModelIsZero) {
    const Problem problem = linear_problem(Vec{1.0, -1.0});
    EXPECT_NEAR(cagm::curvature_reg(Vec{0.2, 0.4}, problem, 0.5), 0.0, 1e-6);
}

TEST(CurvatureReg, QuadraticHandValue) {
    // Hessian diag (2,4): R = 0.5 * (4 + 16) = 10
    const Problem problem = quadratic_problem(Vec{2.0, 4.0});
    EXPECT_NEAR(cagm::curvature_reg(Vec{0.1, -0.2}, problem, 0.5), 10.0, 1e-2);
}

TEST(CurvatureReg, MuZeroIsExactZero) {
    const Problem problem = quadratic_problem(Vec{2.0, 4.0});
    EXPECT_EQ(cagm::curvature_reg(Vec{0.1, -0.2}, problem, 0.0), 0.0);
    const Vec g = cagm::curvature_reg_grad(Vec{0.1, -0.2}, problem, 0.0);
    for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(CurvatureRegGrad, ZeroOnQuadratics) {
    const Problem problem = quadratic_problem(Vec{2.0, 4.0});
    const Vec g = cagm::curvature_reg_grad(Vec{0.3, 0.7}, problem, 0.5);
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-3);
}

// L = w^4: Hessian 12 w^2, R = mu 144 w^4, grad R = 576 mu w^3 -> 72 at w=0.5, mu=1
TEST(CurvatureRegGrad, QuarticSymbolicValue) {
    Problem quartic;
    quartic.loss = [](const Vec& w) { return w[0] * w[0] * w[0] * w[0]; };
    quartic.grad = [](const Vec& w) { return Vec{4.0 * w[0] * w[0] * w[0]}; };
    const Vec g = cagm::curvature_reg_grad(Vec{0.5}, quartic, 1.0);
    EXPECT_NEAR(g[0], 72.0, 72.0 * 0.02);
}

TEST(CurvatureRegGrad, DimensionCapAdvisesAblation) {
    const Problem problem = quadratic_problem(Vec(300, 1.0));
    try {
        cagm::curvature_reg_grad(Vec(300, 0.1), problem, 1.0, 1e-3, 1e-3, 256);
        FAIL() << "expected ValidationError";
    } catch (const cagm::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("disable"), std::string::npos);
    }
}

TEST(Geodesic, IdenticalEndpoints) {
    const Problem problem = quadratic_problem(Vec{1.0, 1.0});
    const Vec w{0.4, -0.6};
    const auto path = cagm::geodesic_path(w, w, problem, 0.01, 8, 10, 0.1);
    EXPECT_NEAR(path.length, 0.0, 1e-12);
    for (const Vec& p : path.points)
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(p[i], w[i]);

    const auto diag = cagm::geodesic_diagnostics(path, w, w, problem, 0.01);
    EXPECT_EQ(diag.ratio, 1.0);
}

TEST(Geodesic, ConstantMetricKeepsStraightLine) {
    const double gamma = 0.04;
    const Problem problem = linear_problem(Vec{1.0, 2.0});  // zero Hessian: M = gamma I
    const Vec a{0.0, 0.0}, b{3.0, 4.0};
    const auto path = cagm::geodesic_path(a, b, problem, gamma, 16, 40, 0.5);

    for (std::size_t j = 0; j < path.points.size(); ++j) {
        const double t = static_cast<double>(j) / 16.0;
        EXPECT_NEAR(path.points[j][0], 3.0 * t, 1e-6);
        EXPECT_NEAR(path.points[j][1], 4.0 * t, 1e-6);
    }
    EXPECT_NEAR(path.length, std::sqrt(gamma) * 5.0, 1e-6);

    const auto diag = cagm::geodesic_diagnostics(path, a, b, problem, gamma);
    EXPECT_NEAR(diag.ratio, 1.0, 1e-6);
}

// constant M = diag(4,1) + gamma: straight path from (0,0) to (1,0), length 2
TEST(Geodesic, AnisotropicConstantMetricLength) {
    const Problem problem = quadratic_problem(Vec{4.0, 1.0});
    const double gamma = 1e-6;
    const Vec a{0.0, 0.0}, b{1.0, 0.0};
    const auto path = cagm::geodesic_path(a, b, problem, gamma, 16, 40, 0.2);
    EXPECT_NEAR(path.length, 2.0, 1e-3);
    for (std::size_t s = 1; s < path.energy_trace.size(); ++s)
        EXPECT_LE(path.energy_trace[s], path.energy_trace[s - 1] + 1e-15);
}

TEST(Geodesic, VaryingMetricRelaxationImprovesEnergy) {
    // Hessian diag = (w0^2, 0): metric varies along the path, so the uniform
    // chord discretization is not optimal and relaxation must make progress
    Problem quartic;
    quartic.loss = [](const Vec& w) { return w[0] * w[0] * w[0] * w[0] / 12.0; };
    quartic.grad = [](const Vec& w) { return Vec{w[0] * w[0] * w[0] / 3.0, 0.0}; };
    const Vec a{0.0, 0.0}, b{2.0, 0.0};
    const auto path = cagm::geodesic_path(a, b, quartic, 0.01, 12, 60, 0.05);

    EXPECT_LT(path.energy_trace.back(), path.energy_trace.front() - 1e-6);
    for (std::size_t s = 1; s < path.energy_trace.size(); ++s)
        EXPECT_LE(path.energy_trace[s], path.energy_trace[s - 1] + 1e-15);

    // endpoints pinned exactly
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(path.points.front()[i], a[i]);
        EXPECT_EQ(path.points.back()[i], b[i]);
    }

    const auto diag = cagm::geodesic_diagnostics(path, a, b, quartic, 0.01);
    EXPECT_LE(diag.ratio, 1.0 + 1e-6);
    EXPECT_LE(diag.geodesic_length, diag.straight_line_length + 1e-9);
}

TEST(Geodesic, ValidatesArguments) {
    const Problem problem = quadratic_problem(Vec{1.0});
    EXPECT_THROW(cagm::geodesic_path(Vec{0.0}, Vec{1.0, 2.0}, problem, 0.01),
                 cagm::ValidationError);
    EXPECT_THROW(cagm::geodesic_path(Vec{0.0}, Vec{1.0}, problem, 0.01, 0),
                 cagm::ValidationError);
}

TEST(OptimizerConfigType, Validation) {
    OptimizerConfig cfg;
    cfg.eta = -1.0;
    EXPECT_THROW(cfg.validate(), cagm::ValidationError);
    cfg = OptimizerConfig{};
    cfg.gamma = 0.0;
    EXPECT_THROW(cfg.validate(), cagm::ValidationError);
    cfg = OptimizerConfig{};
    cfg.lambda = -0.1;
    EXPECT_THROW(cfg.validate(), cagm::ValidationError);
}

TEST(AlignmentContextType, HierarchicalWeighting) {
    // two levels with uniform weights: the combined penalty is the mean
    const std::size_t d = 10;
    const ManifoldMap map = cagm::make_manifold_map(d, {4, 2}, 21);
    cagm::Xoshiro256pp rng(22);
    Vec w(d);
    for (double& v : w) v = rng.gaussian();

    AlignmentContext ctx;
    ctx.levels = {ContextEmbedding{Vec(4, 0.2), 1}, ContextEmbedding{Vec(2, -0.1), 2}};
    ctx.weights = AlignmentContext::uniform_weights(2);
    ctx.validate(map);

    const double a1 = cagm::alignment_penalty(map, w, ctx.levels[0]);
    const double a2 = cagm::alignment_penalty(map, w, ctx.levels[1]);

    OptimizerConfig cfg;
    cfg.eta = 0.1;
    cfg.lambda = 1.0;
    cfg.mu = 0.0;
    cfg.use_curvature = false;
    cfg.use_hierarchy = true;
    const Problem problem = quadratic_problem(Vec(d, 0.0));
    const double combined = cagm::combined_objective(w, problem, ctx, cfg, map);
    EXPECT_NEAR(combined, 0.5 * (a1 + a2), 1e-12);
}

}  // namespace
