#pragma once

// Built-in report suite and the verification battery.
//
// The suite emits CSV tables whose row structure mirrors the experiment axes
// this library models: five synthetic-language presets (perplexity), noise
// levels 0.1/0.5/1.0 (accuracy), train-set fractions 25/50/75/100%, three
// model-size presets, three low-resource presets, a validation-loss-per-epoch
// series, and an accuracy-vs-sequence-length series. Every cell is
// mean +/- sample std over the seed list, baseline (plain SGD, dual phase)
// against the context-aware method. Wall-clock and counted-compute columns
// stand in for direct efficiency measurements and are labeled as proxies;
// the wall-clock table is the one deliberately non-deterministic artifact.
//
// Hyperparameters for the proposed method come from a small grid search run
// by the suite itself and are recorded in suite-summary.json, not presented
// as externally sourced values.

#include <chrono>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cagm/config.hpp"
#include "cagm/harness.hpp"
#include "cagm/metrics.hpp"

namespace cagm {

namespace detail {

struct MethodOutcome {
    Aggregate val_loss;
    Aggregate val_accuracy;
    Aggregate val_perplexity;
    double wall_clock_ms = 0.0;
    std::uint64_t flops_estimate = 0;
    std::uint64_t memory_estimate = 0;
    std::map<long long, std::vector<double>> val_loss_by_epoch;  // epoch -> per-seed values
};

inline MethodOutcome run_method(const ExperimentConfig& cfg, const fs::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult run = run_experiment(cfg, dir);
    MethodOutcome out;
    out.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::vector<double> losses, accs, ppls;
    for (const auto& s : run.seeds) {
        if (!s.ok) throw NumericError("suite: seed " + std::to_string(s.seed) +
                                      " failed numerically: " + s.error);
        losses.push_back(s.final_record.val_loss);
        if (s.final_record.val_accuracy) accs.push_back(*s.final_record.val_accuracy);
        if (s.final_record.val_perplexity) ppls.push_back(*s.final_record.val_perplexity);
        out.flops_estimate += s.final_record.flops_estimate;
        out.memory_estimate = std::max(out.memory_estimate, s.final_record.memory_estimate_bytes);

        std::ifstream metrics_in(s.dir / "metrics.csv");
        std::string line;
        std::getline(metrics_in, line);
        std::map<long long, double> last_per_epoch;
        while (std::getline(metrics_in, line)) {
            if (line.empty()) continue;
            const MetricsRecord r = metrics_from_csv_row(line);
            last_per_epoch[r.epoch] = r.val_loss;
        }
        for (const auto& [epoch, v] : last_per_epoch) out.val_loss_by_epoch[epoch].push_back(v);
    }
    out.val_loss = aggregate(losses);
    out.val_accuracy = aggregate(accs);
    out.val_perplexity = aggregate(ppls);
    return out;
}

inline std::string agg_cells(const Aggregate& a) {
    return format_double(a.mean) + "," + format_double(a.stddev);
}

}  // namespace detail

struct SuiteHyperparams {
    double classify_eta = 0.1;
    double classify_lambda = 0.05;
    double sequence_eta = 0.2;
    double sequence_lambda = 0.05;
};

// Shared protocol for every suite cell. Small enough that the whole suite
// stays minutes-scale on one core.
inline ExperimentConfig suite_base_config(const std::vector<std::uint64_t>& seeds) {
    ExperimentConfig cfg;
    cfg.seeds = seeds;
    cfg.protocol.phase1_steps = 120;
    cfg.protocol.phase2_steps = 120;
    cfg.protocol.eval_every = 8;
    cfg.protocol.checkpoint_every = 120;
    cfg.protocol.batch_size = 32;
    cfg.opt.eta = 0.1;
    cfg.opt.gamma = 0.01;
    cfg.opt.mu = 0.0;
    cfg.opt.use_curvature = false;  // grad R is O(d^2); exercised by `ablate`, not the suite
    cfg.opt.use_hierarchy = false;
    cfg.embed.dim = 3;
    cfg.embed.hidden = {};
    cfg.embed.steps = 300;
    cfg.embed.lr = 0.05;
    cfg.model_hidden = {16};
    return cfg;
}

inline ExperimentConfig suite_classify_config(const std::vector<std::uint64_t>& seeds,
                                              double noise) {
    ExperimentConfig cfg = suite_base_config(seeds);
    cfg.task.family = TaskFamily::noisy_classify;
    cfg.task.n_features = 8;
    cfg.task.n_classes = 4;
    cfg.task.n_train = 256;
    cfg.task.n_val = 256;
    cfg.task.n_test = 256;
    cfg.task.noise_std = noise;
    cfg.task.seed = 11;
    return cfg;
}

inline ExperimentConfig suite_markov_config(const std::vector<std::uint64_t>& seeds, int vocab,
                                            double temperature, std::uint64_t task_seed) {
    ExperimentConfig cfg = suite_base_config(seeds);
    cfg.task.family = TaskFamily::markov_lang;
    cfg.task.vocab = vocab;
    cfg.task.window = 6;
    cfg.task.markov_temperature = temperature;
    cfg.task.n_train = 512;
    cfg.task.n_val = 256;
    cfg.task.n_test = 256;
    cfg.task.seed = task_seed;
    cfg.model_embed_dim = 8;
    cfg.opt.eta = 0.2;
    cfg.embed.dim = 3;
    return cfg;
}

// Grid-select eta and lambda for the proposed method on a representative
// task; the suite records the outcome rather than assuming values.
inline SuiteHyperparams suite_grid_select(const std::vector<std::uint64_t>& seeds,
                                          const fs::path& out_dir) {
    SuiteHyperparams hp;
    {
        ExperimentConfig cfg = suite_classify_config(seeds, 0.5);
        cfg.method = Method::cagm;
        cfg.grid.eta = {0.05, 0.1, 0.2};
        cfg.grid.lambda = {0.01, 0.05, 0.2};
        const GridResult grid = grid_search(cfg, out_dir / "grid-classify");
        hp.classify_eta = grid.best_config.opt.eta;
        hp.classify_lambda = grid.best_config.opt.lambda;
    }
    {
        ExperimentConfig cfg = suite_markov_config(seeds, 16, 1.0, 21);
        cfg.method = Method::cagm;
        cfg.grid.eta = {0.1, 0.2, 0.4};
        cfg.grid.lambda = {0.01, 0.05, 0.2};
        const GridResult grid = grid_search(cfg, out_dir / "grid-markov");
        hp.sequence_eta = grid.best_config.opt.eta;
        hp.sequence_lambda = grid.best_config.opt.lambda;
    }
    return hp;
}

struct SuitePairOutcome {
    detail::MethodOutcome baseline;
    detail::MethodOutcome proposed;
};

namespace detail {

inline SuitePairOutcome run_pair(ExperimentConfig cfg, const SuiteHyperparams& hp,
                                 bool sequence_task, const fs::path& dir) {
    SuitePairOutcome out;
    ExperimentConfig base = cfg;
    base.method = Method::baseline_sgd;
    base.opt.lambda = 0.0;
    base.opt.use_alignment = false;
    base.opt.eta = sequence_task ? hp.sequence_eta : hp.classify_eta;
    out.baseline = run_method(base, dir / "baseline");

    ExperimentConfig prop = cfg;
    prop.method = Method::cagm;
    prop.opt.use_alignment = true;
    prop.opt.eta = sequence_task ? hp.sequence_eta : hp.classify_eta;
    prop.opt.lambda = sequence_task ? hp.sequence_lambda : hp.classify_lambda;
    out.proposed = run_method(prop, dir / "proposed");
    return out;
}

}  // namespace detail

// Emits every table/figure analogue into out_dir. Returns the hyperparams it
// selected so callers (and suite-summary.json) can report them.
inline SuiteHyperparams run_report_suite(const fs::path& out_dir,
                                        std::vector<std::uint64_t> seeds = {1, 2, 3}) {
    if (seeds.empty()) throw ValidationError("suite: seeds must be non-empty");
    fs::create_directories(out_dir);
    const SuiteHyperparams hp = suite_grid_select(seeds, out_dir);

    // Table 1 analogue: five synthetic-language presets, perplexity.
    struct LangPreset {
        const char* name;
        int vocab;
        double temperature;
        std::uint64_t task_seed;
    };
    const std::vector<LangPreset> lang_presets = {
        {"lang-A", 12, 1.0, 101}, {"lang-B", 16, 1.2, 102}, {"lang-C", 20, 0.8, 103},
        {"lang-D", 16, 0.6, 104}, {"lang-E", 24, 1.0, 105}};
    {
        std::ostringstream t1;
        t1 << "dataset,baseline_ppl_mean,baseline_ppl_std,proposed_ppl_mean,proposed_ppl_std\n";
        for (const auto& p : lang_presets) {
            const auto pair =
                detail::run_pair(suite_markov_config(seeds, p.vocab, p.temperature, p.task_seed),
                                 hp, true, out_dir / "table1" / p.name);
            t1 << p.name << ',' << detail::agg_cells(pair.baseline.val_perplexity) << ','
               << detail::agg_cells(pair.proposed.val_perplexity) << '\n';
        }
        detail::write_text_file(out_dir / "table1.csv", t1.str());
    }

    // Table 3 analogue: gaussian noise levels 0.1 / 0.5 / 1.0, accuracy.
    // Also reused for the Fig 4 series (epoch-wise validation loss) and the
    // Table 2 proxy columns.
    {
        std::ostringstream t3, fig4, t2;
        t3 << "noise_std,baseline_accuracy_mean,baseline_accuracy_std,"
              "proposed_accuracy_mean,proposed_accuracy_std\n";
        for (double noise : {0.1, 0.5, 1.0}) {
            const auto pair = detail::run_pair(suite_classify_config(seeds, noise), hp, false,
                                               out_dir / "table3" / ("noise-" + format_double(noise)));
            t3 << format_double(noise) << ',' << detail::agg_cells(pair.baseline.val_accuracy)
               << ',' << detail::agg_cells(pair.proposed.val_accuracy) << '\n';

            if (noise == 0.5) {
                fig4 << "epoch,baseline_val_loss_mean,baseline_val_loss_std,"
                        "proposed_val_loss_mean,proposed_val_loss_std\n";
                for (const auto& [epoch, base_vals] : pair.baseline.val_loss_by_epoch) {
                    const auto it = pair.proposed.val_loss_by_epoch.find(epoch);
                    if (it == pair.proposed.val_loss_by_epoch.end()) continue;
                    fig4 << epoch << ',' << detail::agg_cells(aggregate(base_vals)) << ','
                         << detail::agg_cells(aggregate(it->second)) << '\n';
                }
                t2 << "metric,baseline,proposed,note\n";
                t2 << "training_wall_clock_ms," << format_double(pair.baseline.wall_clock_ms)
                   << ',' << format_double(pair.proposed.wall_clock_ms)
                   << ",measured proxy for training cost\n";
                t2 << "counted_flops_estimate," << pair.baseline.flops_estimate << ','
                   << pair.proposed.flops_estimate << ",counted proxy (not measured)\n";
                t2 << "memory_estimate_bytes," << pair.baseline.memory_estimate << ','
                   << pair.proposed.memory_estimate << ",static estimate (not measured)\n";
            }
        }
        detail::write_text_file(out_dir / "table3.csv", t3.str());
        detail::write_text_file(out_dir / "fig-4.csv", fig4.str());
        detail::write_text_file(out_dir / "table2_proxy.csv", t2.str());
    }

    // Table 4 analogue: training-set fractions 25/50/75/100%.
    {
        std::ostringstream t4;
        t4 << "train_fraction_percent,baseline_accuracy_mean,baseline_accuracy_std,"
              "proposed_accuracy_mean,proposed_accuracy_std\n";
        for (double fraction : {0.25, 0.5, 0.75, 1.0}) {
            ExperimentConfig cfg = suite_classify_config(seeds, 0.5);
            cfg.task.family = TaskFamily::size_sweep;
            cfg.task.fraction = fraction;
            const auto pair = detail::run_pair(
                cfg, hp, false,
                out_dir / "table4" / ("fraction-" + format_double(fraction)));
            t4 << format_double(fraction * 100.0) << ','
               << detail::agg_cells(pair.baseline.val_accuracy) << ','
               << detail::agg_cells(pair.proposed.val_accuracy) << '\n';
        }
        detail::write_text_file(out_dir / "table4.csv", t4.str());
    }

    // Table 5 analogue: small / medium / large model-width presets.
    {
        struct SizeRow {
            const char* name;
            std::vector<int> hidden;
        };
        const std::vector<SizeRow> sizes = {
            {"small", {16}}, {"medium", {64, 64}}, {"large", {128, 128, 128}}};
        std::ostringstream t5;
        t5 << "model_size,baseline_accuracy_mean,baseline_accuracy_std,"
              "proposed_accuracy_mean,proposed_accuracy_std\n";
        for (const auto& size : sizes) {
            ExperimentConfig cfg = suite_classify_config(seeds, 0.5);
            cfg.model_hidden = size.hidden;
            const auto pair =
                detail::run_pair(cfg, hp, false, out_dir / "table5" / size.name);
            t5 << size.name << ',' << detail::agg_cells(pair.baseline.val_accuracy) << ','
               << detail::agg_cells(pair.proposed.val_accuracy) << '\n';
        }
        detail::write_text_file(out_dir / "table5.csv", t5.str());
    }

    // Table 6 analogue: low-resource language presets (next-token accuracy).
    {
        std::ostringstream t6;
        t6 << "dataset_size,baseline_accuracy_mean,baseline_accuracy_std,"
              "proposed_accuracy_mean,proposed_accuracy_std\n";
        for (SizePreset preset : {SizePreset::small, SizePreset::medium, SizePreset::large}) {
            ExperimentConfig cfg = suite_markov_config(seeds, 16, 1.0, 31);
            cfg.task.family = TaskFamily::low_resource;
            cfg.task.base_family = TaskFamily::markov_lang;
            cfg.task.size_preset = preset;
            const std::string name = detail::preset_name(preset);
            const auto pair = detail::run_pair(cfg, hp, true, out_dir / "table6" / name);
            t6 << name << ',' << detail::agg_cells(pair.baseline.val_accuracy) << ','
               << detail::agg_cells(pair.proposed.val_accuracy) << '\n';
        }
        detail::write_text_file(out_dir / "table6.csv", t6.str());
    }

    // Fig 7 analogue: accuracy across sequence lengths.
    {
        std::ostringstream fig7;
        fig7 << "seq_len,baseline_accuracy_mean,baseline_accuracy_std,"
                "proposed_accuracy_mean,proposed_accuracy_std\n";
        for (int len : {2, 4, 8, 16, 32}) {
            ExperimentConfig cfg = suite_base_config(seeds);
            cfg.task.family = TaskFamily::long_range_seq;
            cfg.task.n_classes = 4;
            cfg.task.vocab = 12;
            cfg.task.seq_len = len;
            cfg.task.n_train = 256;
            cfg.task.n_val = 256;
            cfg.task.n_test = 256;
            cfg.task.seed = 41;
            cfg.model_embed_dim = 8;
            cfg.opt.eta = hp.sequence_eta;
            const auto pair = detail::run_pair(cfg, hp, true,
                                               out_dir / "fig7" / ("len-" + std::to_string(len)));
            fig7 << len << ',' << detail::agg_cells(pair.baseline.val_accuracy) << ','
                 << detail::agg_cells(pair.proposed.val_accuracy) << '\n';
        }
        detail::write_text_file(out_dir / "fig-7.csv", fig7.str());
    }

    std::ostringstream summary;
    summary << "{\n";
    summary << "  \"hyperparams\": {\n";
    summary << "    \"classify_eta\": " << format_double(hp.classify_eta) << ",\n";
    summary << "    \"classify_lambda\": " << format_double(hp.classify_lambda) << ",\n";
    summary << "    \"sequence_eta\": " << format_double(hp.sequence_eta) << ",\n";
    summary << "    \"sequence_lambda\": " << format_double(hp.sequence_lambda) << "\n";
    summary << "  },\n";
    summary << "  \"hyperparam_provenance\": \"grid_search over suite presets; no external values\",\n";
    summary << "  \"proposed_configuration\": \"descent mode, alignment term on, curvature and "
               "hierarchy off\",\n";
    summary << "  \"seeds\": [";
    for (std::size_t i = 0; i < seeds.size(); ++i) summary << (i ? ", " : "") << seeds[i];
    summary << "]\n";
    summary << "}\n";
    detail::write_text_file(out_dir / "suite-summary.json", summary.str());
    return hp;
}

// ---------------------------------------------------------------------------
// verification battery
// ---------------------------------------------------------------------------

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SmokeLevelResult {
    double noise = 0.0;
    double lambda_selected = 0.0;
    double baseline_accuracy = 0.0;
    double cagm_accuracy = 0.0;
    double gap_pp = 0.0;  // (cagm - baseline) in percentage points
    std::string direction;
    bool within_margin = false;  // cagm >= baseline - 0.5pp
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    std::vector<SmokeLevelResult> smoke;
    bool oracles_ok = true;
    bool smoke_ok = true;
};

namespace detail {

inline void add_check(VerifyReport& report, const std::string& name, bool pass,
                      const std::string& text) {
    report.checks.push_back({name, pass, text});
    if (!pass) report.oracles_ok = false;
}

}  // namespace detail

// Condensed oracle battery plus the directional statistical smoke test. The
// smoke result is a measurement, reported with its direction either way; the
// margin check asserts only that the context method does not lose more than
// 0.5 accuracy points against baseline under grid-selected lambda.
inline VerifyReport run_verify(const fs::path& out_dir,
                               std::vector<std::uint64_t> smoke_seeds = {1, 2, 3, 4, 5, 6, 7, 8,
                                                                         9, 10}) {
    fs::create_directories(out_dir);
    VerifyReport report;

    // gradient oracle: analytic backprop vs central differences
    {
        bool pass = true;
        std::string worst;
        for (std::uint64_t seed = 0; seed < 5 && pass; ++seed) {
            ModelSpec spec;
            spec.arch = Architecture::mlp_classifier;
            spec.widths = {4, 6, 3};
            spec.seed = 9000 + seed;
            const Vec w = init_params(spec);
            Xoshiro256pp rng(seed);
            TaskBatch batch;
            batch.kind = TaskKind::classification;
            batch.inputs = Matrix(5, 4);
            for (double& v : batch.inputs.data) v = rng.gaussian();
            for (int i = 0; i < 5; ++i) batch.labels.push_back(static_cast<int>(rng.bounded(3)));
            const Vec analytic = loss_grad(w, batch, spec);
            const Vec fd = fd_gradient([&](const Vec& p) { return loss(p, batch, spec); }, w,
                                       1e-5);
            Vec gap = analytic;
            for (std::size_t i = 0; i < gap.size(); ++i) gap[i] -= fd[i];
            const double rel = norm_inf(gap) / (1.0 + norm_inf(fd));
            if (rel > 1e-4) {
                pass = false;
                worst = "relative gap " + format_double(rel);
            }
        }
        detail::add_check(report, "gradient-oracle", pass,
                          pass ? "backprop matches central differences" : worst);
    }

    // update-rule hand case in both sign modes
    {
        Problem quad;
        quad.loss = [](const Vec& w) { return 0.5 * dot(w, w); };
        quad.grad = [](const Vec& w) { return w; };
        ManifoldMap map;
        map.levels.push_back(Matrix(1, 2));
        map.levels[0](0, 0) = 1.0;
        OptimizerConfig cfg;
        cfg.eta = 0.1;
        cfg.lambda = 0.1;
        cfg.mu = 0.0;
        cfg.use_curvature = false;
        const AlignmentContext ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.5}, 1});
        const Vec descent = cagm_step(Vec{1.0, 0.0}, quad, ctx, cfg, map);
        cfg.sign_mode = SignMode::literal;
        const Vec literal = cagm_step(Vec{1.0, 0.0}, quad, ctx, cfg, map);
        const bool pass = std::abs(descent[0] - 0.89) <= 1e-12 && std::abs(descent[1]) <= 1e-12 &&
                          std::abs(literal[0] - 1.0) <= 1e-12 && std::abs(literal[1]) <= 1e-12;
        detail::add_check(report, "update-rule-hand-case", pass,
                          "descent (0.89, 0) / literal (1.0, 0), got (" +
                              format_double(descent[0]) + ", " + format_double(literal[0]) + ")");
    }

    // metric tensor and curvature regularizer hand values
    {
        Problem quad;
        quad.loss = [](const Vec& w) { return w[0] * w[0] + 2.0 * w[1] * w[1]; };  // H = (2,4)
        quad.grad = [](const Vec& w) { return Vec{2.0 * w[0], 4.0 * w[1]}; };
        const MetricDiag m = metric_tensor(Vec{0.2, -0.4}, quad, 0.01);
        const double r = curvature_reg(Vec{0.2, -0.4}, quad, 0.5);
        const bool pass = std::abs(m.values[0] - 2.01) <= 1e-3 &&
                          std::abs(m.values[1] - 4.01) <= 1e-3 && std::abs(r - 10.0) <= 0.1;
        detail::add_check(report, "metric-and-curvature-hand-values", pass,
                          "M = (" + format_double(m.values[0]) + ", " +
                              format_double(m.values[1]) + "), R = " + format_double(r));
    }

    // geodesic: constant metric keeps the chord
    {
        Problem linear;
        linear.loss = [](const Vec& w) { return w[0] + 2.0 * w[1]; };
        linear.grad = [](const Vec&) { return Vec{1.0, 2.0}; };
        const GeodesicPath path =
            geodesic_path(Vec{0.0, 0.0}, Vec{3.0, 4.0}, linear, 0.04, 12, 30, 0.5);
        double deviation = 0.0;
        for (std::size_t j = 0; j < path.points.size(); ++j) {
            const double t = static_cast<double>(j) / 12.0;
            deviation = std::max(deviation, std::abs(path.points[j][0] - 3.0 * t));
            deviation = std::max(deviation, std::abs(path.points[j][1] - 4.0 * t));
        }
        bool monotone = true;
        for (std::size_t s = 1; s < path.energy_trace.size(); ++s)
            if (path.energy_trace[s] > path.energy_trace[s - 1] + 1e-15) monotone = false;
        const bool pass =
            deviation <= 1e-6 && monotone && std::abs(path.length - 0.2 * 5.0) <= 1e-6;
        detail::add_check(report, "geodesic-constant-metric", pass,
                          "max deviation " + format_double(deviation) + ", length " +
                              format_double(path.length));
    }

    // PCA vs brute-force covariance eigendecomposition
    {
        bool pass = true;
        for (std::uint64_t seed = 0; seed < 10 && pass; ++seed) {
            Xoshiro256pp rng(4000 + seed);
            Matrix x(12, 5);
            for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
            const PcaModel model = pca_fit(x, 5);
            const EighResult eig = jacobi_eigh(sample_covariance(x));
            for (std::size_t k = 0; k < 5; ++k)
                if (std::abs(model.explained_variance[k] - std::max(0.0, eig.eigenvalues[k])) >
                    1e-8)
                    pass = false;
        }
        detail::add_check(report, "pca-oracle", pass, "eigenvalues match brute force");
    }

    // reduction: lambda = mu = 0 training equals plain SGD bit-exactly
    {
        ExperimentConfig cfg = suite_classify_config({3}, 0.5);
        cfg.protocol.phase1_steps = 20;
        cfg.protocol.phase2_steps = 80;
        cfg.protocol.checkpoint_every = 100;
        cfg.opt.lambda = 0.0;
        cfg.opt.mu = 0.0;
        cfg.opt.use_alignment = false;
        cfg.opt.use_curvature = false;
        ExperimentConfig base = cfg;
        base.method = Method::baseline_sgd;
        const SeedRunResult a = run_single_seed(cfg, 3, out_dir / "verify-reduction" / "cagm");
        const SeedRunResult b = run_single_seed(base, 3, out_dir / "verify-reduction" / "sgd");
        const bool pass = a.ok && b.ok && a.final_params == b.final_params;
        detail::add_check(report, "sgd-reduction", pass, "degenerate update is bit-identical");
    }

    // checkpoint round trip
    {
        Checkpoint c;
        c.run_id = "verify";
        c.phase = 2;
        c.step = 7;
        c.epoch = 1;
        c.epoch_pos = 3;
        c.run_seed = 99;
        c.params = {0.1, -2.5e-7, 3.0};
        c.embed_params = {{1.0, 2.0}};
        c.prng_state = {1, 2, 3, 18446744073709551615ULL};
        c.optimizer_config_hash = "abc";
        c.config_digest = "def";
        const std::string once = checkpoint_to_json(c);
        const std::string twice = checkpoint_to_json(checkpoint_from_json(once));
        detail::add_check(report, "checkpoint-roundtrip", once == twice,
                          "save -> load -> save is byte-identical");
    }

    // directional smoke test: measured, direction reported either way
    for (double noise : {0.1, 0.5, 1.0}) {
        ExperimentConfig cfg = suite_classify_config(smoke_seeds, noise);
        const fs::path level_dir = out_dir / ("smoke-noise-" + format_double(noise));

        ExperimentConfig base = cfg;
        base.method = Method::baseline_sgd;
        base.opt.use_alignment = false;
        const ExperimentResult base_run = run_experiment(base, level_dir / "baseline");

        ExperimentConfig grid_cfg = cfg;
        grid_cfg.method = Method::cagm;
        grid_cfg.opt.use_alignment = true;
        grid_cfg.grid.lambda = {0.01, 0.05, 0.2};
        const GridResult grid = grid_search(grid_cfg, level_dir / "grid");
        const GridCell& best = grid.cells[grid.best_index];

        std::vector<double> base_accs, cagm_accs;
        for (const auto& s : base_run.seeds)
            if (s.ok && s.final_record.val_accuracy)
                base_accs.push_back(*s.final_record.val_accuracy);
        SmokeLevelResult level;
        level.noise = noise;
        level.lambda_selected = best.lambda;
        level.baseline_accuracy = aggregate(base_accs).mean;
        level.cagm_accuracy = best.val_accuracy.mean;
        level.gap_pp = (level.cagm_accuracy - level.baseline_accuracy) * 100.0;
        level.direction = level.gap_pp > 0.0    ? "cagm_above_baseline"
                          : level.gap_pp < 0.0 ? "baseline_above_cagm"
                                               : "tie";
        level.within_margin = level.gap_pp >= -0.5;
        if (!level.within_margin) report.smoke_ok = false;
        report.smoke.push_back(level);
    }

    std::ostringstream json;
    json << "{\n  \"checks\": [\n";
    for (std::size_t i = 0; i < report.checks.size(); ++i) {
        const auto& c = report.checks[i];
        json << "    {\"name\": \"" << c.name << "\", \"pass\": " << (c.pass ? "true" : "false")
             << ", \"detail\": \"" << c.detail << "\"}" << (i + 1 < report.checks.size() ? "," : "")
             << '\n';
    }
    json << "  ],\n  \"smoke\": [\n";
    for (std::size_t i = 0; i < report.smoke.size(); ++i) {
        const auto& s = report.smoke[i];
        json << "    {\"noise\": " << format_double(s.noise)
             << ", \"lambda_selected\": " << format_double(s.lambda_selected)
             << ", \"baseline_accuracy\": " << format_double(s.baseline_accuracy)
             << ", \"cagm_accuracy\": " << format_double(s.cagm_accuracy)
             << ", \"gap_pp\": " << format_double(s.gap_pp) << ", \"direction\": \""
             << s.direction << "\", \"within_margin\": " << (s.within_margin ? "true" : "false")
             << "}" << (i + 1 < report.smoke.size() ? "," : "") << '\n';
    }
    json << "  ],\n";
    json << "  \"oracles_ok\": " << (report.oracles_ok ? "true" : "false") << ",\n";
    json << "  \"smoke_ok\": " << (report.smoke_ok ? "true" : "false") << "\n}\n";
    detail::write_text_file(out_dir / "verify-report.json", json.str());
    return report;
}

}  // namespace cagm
