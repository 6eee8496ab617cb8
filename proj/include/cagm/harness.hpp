#pragma once

// Experiment runner.
//
// Dual-phase protocol: phase 1 trains with plain SGD to establish the
// baseline; at the phase boundary the supplementary embedding nets are
// fitted against PCA targets of the training inputs, and phase 2 continues
// from the phase-1 state with the context-aware update. The (epoch, batch)
// cursor runs continuously across phases, so a phase 2 with every term
// disabled consumes exactly the batch stream an extended phase 1 would.
//
// Determinism contract: given (config, seed), every artifact except the
// timing files is byte-identical across reruns. All randomness is derived
// functionally from the run seed (batch order from (seed, epoch), model init
// from the seed, data from the task seed mixed with the run seed), which is
// also what makes mid-run resume bit-exact: a checkpoint pins the cursor and
// the parameter state, and everything else is recomputed.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cagm/checkpoint.hpp"
#include "cagm/config.hpp"
#include "cagm/embed.hpp"
#include "cagm/error.hpp"
#include "cagm/format.hpp"
#include "cagm/linalg.hpp"
#include "cagm/metrics.hpp"
#include "cagm/models.hpp"
#include "cagm/optimizer.hpp"
#include "cagm/pca.hpp"
#include "cagm/tasks.hpp"

namespace cagm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// model / dataset construction
// ---------------------------------------------------------------------------

inline bool dataset_is_sequence(const TaskSpec& task) {
    if (task.family == TaskFamily::low_resource)
        return task.base_family == TaskFamily::markov_lang;
    return task.family == TaskFamily::long_range_seq || task.family == TaskFamily::markov_lang;
}

inline int task_output_dim(const TaskSpec& task) {
    switch (task.family) {
        case TaskFamily::markov_lang: return task.vocab;
        case TaskFamily::long_range_seq: return task.n_classes;
        case TaskFamily::low_resource:
            return task.base_family == TaskFamily::markov_lang ? task.vocab : task.n_classes;
        default: return task.n_classes;
    }
}

inline ModelSpec build_model_spec(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    ModelSpec spec;
    spec.activation = cfg.activation;
    spec.seed = derive_seed(run_seed, 0x30d1);
    if (dataset_is_sequence(cfg.task)) {
        spec.arch = Architecture::seq_model;
        spec.vocab = cfg.task.vocab;
        spec.window = cfg.model_window;
        spec.widths.push_back(cfg.model_embed_dim);
    } else {
        spec.arch = Architecture::mlp_classifier;
        spec.widths.push_back(cfg.task.n_features);
    }
    for (int h : cfg.model_hidden) spec.widths.push_back(h);
    spec.widths.push_back(task_output_dim(cfg.task));
    validate_spec(spec);
    return spec;
}

// Train/val come from the source domain; for domain_shift the test batch is
// the shifted target domain.
inline DatasetSplit build_dataset(const TaskSpec& task, std::uint64_t run_seed) {
    TaskSpec effective = task;
    effective.seed = derive_seed(task.seed, run_seed);
    if (effective.family == TaskFamily::domain_shift) {
        DomainShiftData data = gen_domain_shift(effective);
        DatasetSplit split = std::move(data.source);
        split.test = std::move(data.target.test);
        return split;
    }
    return generate(effective);
}

// Embedding-side features: tabular inputs pass through; token sequences
// become normalized token-count vectors over the vocabulary.
inline Matrix embed_features(const TaskBatch& batch, int vocab) {
    if (batch.kind != TaskKind::sequence) return batch.inputs;
    Matrix features(batch.sequences.size(), static_cast<std::size_t>(vocab));
    for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
        const auto& seq = batch.sequences[i];
        const double share = 1.0 / static_cast<double>(seq.size());
        for (int tok : seq) features(i, static_cast<std::size_t>(tok)) += share;
    }
    return features;
}

// ---------------------------------------------------------------------------
// embeddings (phase-2 preparation)
// ---------------------------------------------------------------------------

struct EmbedState {
    bool active = false;
    std::vector<int> dims;
    std::vector<PcaModel> pcas;
    std::vector<EmbedNet> nets;
    ManifoldMap map;
    std::vector<double> weights;
    std::vector<ContextEmbedding> train_mean_context;  // per level, for gradient monitoring
};

inline std::vector<int> embedding_dims(const ExperimentConfig& cfg) {
    if (cfg.opt.use_hierarchy) return cfg.embed.hierarchy_dims;
    return {cfg.embed.dim};
}

inline AlignmentContext mean_context(const EmbedState& state, const Matrix& features) {
    AlignmentContext ctx;
    ctx.weights = state.weights;
    for (std::size_t k = 0; k < state.nets.size(); ++k) {
        Vec mean(static_cast<std::size_t>(state.dims[k]), 0.0);
        for (std::size_t i = 0; i < features.rows; ++i)
            axpy(1.0, context_embedding(state.nets[k], features.row(i)).values, mean);
        for (double& v : mean) v /= static_cast<double>(features.rows);
        ctx.levels.push_back(ContextEmbedding{std::move(mean), static_cast<int>(k) + 1});
    }
    return ctx;
}

inline EmbedState prepare_embeddings(const ExperimentConfig& cfg, const TaskBatch& train,
                                     const ModelSpec& model, std::uint64_t run_seed) {
    EmbedState state;
    state.dims = embedding_dims(cfg);
    const Matrix features = embed_features(train, cfg.task.vocab);
    const std::size_t max_dim = std::min(features.rows, features.cols);
    for (int d : state.dims)
        if (d < 1 || static_cast<std::size_t>(d) > max_dim)
            throw ValidationError("embed: level dim " + std::to_string(d) +
                                  " outside [1, min(n_train, n_features)] = [1, " +
                                  std::to_string(max_dim) + "]");

    for (std::size_t k = 0; k < state.dims.size(); ++k) {
        const PcaModel pca = pca_fit(features, static_cast<std::size_t>(state.dims[k]));
        EmbedNet net = make_embed_net(static_cast<int>(features.cols), cfg.embed.hidden,
                                      state.dims[k], cfg.activation,
                                      derive_seed(run_seed, 0xe3b0 + k));
        EmbedTrainResult trained =
            train_embed_net(std::move(net), features, pca, cfg.embed.steps, cfg.embed.lr);
        state.pcas.push_back(pca);
        state.nets.push_back(std::move(trained.net));
    }
    state.map = make_manifold_map(param_count(model), state.dims, cfg.embed.manifold_seed);
    state.weights = AlignmentContext::uniform_weights(state.dims.size());
    state.train_mean_context = mean_context(state, features).levels;
    state.active = true;
    return state;
}

// ---------------------------------------------------------------------------
// deterministic batch stream
// ---------------------------------------------------------------------------

// Batch order is a pure function of (run_seed, epoch): fixed-size chunks of a
// seeded permutation, or token-budget buckets for sequence tasks when
// protocol.max_tokens is set. Checkpoints store the generator state for the
// current epoch, so resuming regenerates the identical stream.
class BatchStream {
public:
    BatchStream(const TaskBatch& train, const ProtocolConfig& protocol, std::uint64_t run_seed)
        : train_(&train), protocol_(protocol), run_seed_(run_seed) {}

    std::uint64_t epoch_seed(long long epoch) const {
        return derive_seed(run_seed_, 0xba7c0000ULL + static_cast<std::uint64_t>(epoch));
    }

    Xoshiro256pp::State epoch_state(long long epoch) const {
        return Xoshiro256pp(epoch_seed(epoch)).state();
    }

    std::vector<TaskBatch> epoch_batches(long long epoch) const {
        if (protocol_.max_tokens > 0 && train_->kind == TaskKind::sequence)
            return dynamic_batches(*train_, static_cast<std::size_t>(protocol_.max_tokens),
                                   epoch_seed(epoch));
        const std::size_t n = train_->size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Xoshiro256pp rng(epoch_seed(epoch));
        shuffle(order, rng);

        std::vector<TaskBatch> batches;
        const std::size_t chunk = static_cast<std::size_t>(protocol_.batch_size);
        for (std::size_t start = 0; start < n; start += chunk) {
            const std::size_t stop = std::min(n, start + chunk);
            batches.push_back(tasks_subset(
                std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop))));
        }
        return batches;
    }

    // digest of the example-id stream consumed over `steps` updates; ablation
    // variants under one seed must agree on it
    std::string order_digest(long long steps) const {
        std::string text;
        long long produced = 0;
        for (long long epoch = 0; produced < steps; ++epoch) {
            const auto batches = epoch_batches(epoch);
            for (const auto& b : batches) {
                if (produced == steps) break;
                text += batch_signature(b);
                ++produced;
            }
        }
        return hex64(fnv1a(text));
    }

private:
    TaskBatch tasks_subset(const std::vector<std::size_t>& idx) const {
        TaskBatch out;
        out.kind = train_->kind;
        if (train_->kind == TaskKind::sequence) {
            for (std::size_t i : idx) {
                out.sequences.push_back(train_->sequences[i]);
                out.labels.push_back(train_->labels[i]);
            }
            return out;
        }
        out.inputs = Matrix(idx.size(), train_->inputs.cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < train_->inputs.cols; ++j)
                out.inputs(r, j) = train_->inputs(idx[r], j);
        if (train_->kind == TaskKind::regression) {
            out.targets = Matrix(idx.size(), train_->targets.cols);
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < train_->targets.cols; ++j)
                    out.targets(r, j) = train_->targets(idx[r], j);
        } else {
            for (std::size_t i : idx) out.labels.push_back(train_->labels[i]);
        }
        return out;
    }

    static std::string batch_signature(const TaskBatch& b) {
        std::ostringstream out;
        if (b.kind == TaskKind::sequence) {
            for (const auto& s : b.sequences) {
                for (int t : s) out << t << ' ';
                out << ';';
            }
        } else {
            for (double v : b.inputs.data) out << format_double(v) << ' ';
        }
        for (int label : b.labels) out << label << ' ';
        return out.str();
    }

    const TaskBatch* train_;
    ProtocolConfig protocol_;
    std::uint64_t run_seed_;
};

// ---------------------------------------------------------------------------
// single-seed training
// ---------------------------------------------------------------------------

struct SeedRunResult {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::string run_id;
    MetricsRecord final_record;
    Vec final_params;
    fs::path dir;
};

namespace detail {

inline void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    out << content;
}

struct RunContext {
    ExperimentConfig cfg;
    std::uint64_t run_seed = 0;
    std::string run_id;
    DatasetSplit data;
    ModelSpec model;
    fs::path dir;
    long long total_steps = 0;
    std::uint64_t flops_per_example_step = 0;
    std::uint64_t memory_estimate = 0;
};

inline RunContext make_run_context(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                   const fs::path& dir) {
    RunContext rc;
    rc.cfg = cfg;
    rc.run_seed = run_seed;
    rc.run_id = config_digest(cfg) + "-s" + std::to_string(run_seed);
    rc.data = build_dataset(cfg.task, run_seed);
    rc.model = build_model_spec(cfg, run_seed);
    rc.dir = dir;
    rc.total_steps = cfg.protocol.phase1_steps + cfg.protocol.phase2_steps;

    const std::uint64_t d = param_count(rc.model);
    rc.flops_per_example_step = 6 * d;  // forward + backward, counted not measured

    std::uint64_t dataset_scalars = 0;
    for (const TaskBatch* b : {&rc.data.train, &rc.data.val, &rc.data.test}) {
        dataset_scalars += b->inputs.data.size() + b->targets.data.size() + b->labels.size();
        for (const auto& s : b->sequences) dataset_scalars += s.size();
    }
    rc.memory_estimate = 8 * (4 * d + dataset_scalars);
    return rc;
}

struct TrainerState {
    Vec w;
    int phase = 1;
    long long step = 0;
    long long epoch = 0;
    long long epoch_pos = 0;
    EmbedState embed;
    std::uint64_t flops = 0;
};

inline TaskBatch probe_batch(const DatasetSplit& data, int count) {
    TaskBatch probe = data.train;
    const std::size_t keep =
        std::min<std::size_t>(probe.size(), static_cast<std::size_t>(count));
    if (probe.kind == TaskKind::sequence) {
        probe.sequences.resize(keep);
        probe.labels.resize(keep);
    } else {
        Matrix inputs(keep, probe.inputs.cols);
        for (std::size_t i = 0; i < keep; ++i)
            for (std::size_t j = 0; j < probe.inputs.cols; ++j)
                inputs(i, j) = probe.inputs(i, j);
        probe.inputs = std::move(inputs);
        if (probe.kind == TaskKind::regression) {
            Matrix targets(keep, probe.targets.cols);
            for (std::size_t i = 0; i < keep; ++i)
                for (std::size_t j = 0; j < probe.targets.cols; ++j)
                    targets(i, j) = probe.targets(i, j);
            probe.targets = std::move(targets);
        } else {
            probe.labels.resize(keep);
        }
    }
    return probe;
}

inline MetricsRecord evaluate(const RunContext& rc, const TrainerState& st) {
    MetricsRecord r;
    r.run_id = rc.run_id;
    r.phase = st.phase;
    r.step = st.step;
    r.epoch = st.epoch;
    r.train_loss = loss(st.w, rc.data.train, rc.model);
    r.val_loss = loss(st.w, rc.data.val, rc.model);
    // non-finite metrics never reach a report without the failed flag
    if (!std::isfinite(r.train_loss) || !std::isfinite(r.val_loss))
        throw NumericError("evaluate: non-finite loss at step " + std::to_string(st.step));
    if (rc.data.val.kind != TaskKind::regression)
        r.val_accuracy = accuracy(st.w, rc.data.val, rc.model);
    if (rc.data.val.kind == TaskKind::sequence)
        r.val_perplexity = perplexity(st.w, rc.data.val, rc.model);
    r.grad_norm_loss = norm2(loss_grad(st.w, rc.data.train, rc.model));
    if (st.embed.active && rc.cfg.opt.alignment_active()) {
        AlignmentContext ctx;
        ctx.levels = st.embed.train_mean_context;
        ctx.weights = st.embed.weights;
        Vec g(st.w.size(), 0.0);
        for (std::size_t k = 0; k < ctx.levels.size(); ++k)
            axpy(ctx.weights[k], alignment_grad(st.embed.map, st.w, ctx.levels[k]), g);
        r.grad_norm_alignment = norm2(g);
    }
    if (st.phase == 2 && rc.cfg.method == Method::cagm && rc.cfg.opt.curvature_active() &&
        st.w.size() <= static_cast<std::size_t>(rc.cfg.opt.curvature_dim_cap)) {
        // gradient monitoring probe: leading train slice keeps this affordable
        const TaskBatch probe = probe_batch(rc.data, 16);
        r.grad_norm_curvature =
            norm2(curvature_reg_grad(st.w, probe, rc.model, rc.cfg.opt.mu,
                                     rc.cfg.opt.hess_fd_step, rc.cfg.opt.curv_fd_step,
                                     rc.cfg.opt.curvature_dim_cap));
    }
    r.flops_estimate = st.flops;
    r.memory_estimate_bytes = rc.memory_estimate;
    return r;
}

// Rebuilds the embedding state around checkpointed net parameters: the
// manifold map and level layout are pure functions of the config, so only
// the trained thetas need restoring (retraining would produce the same
// values, just slower).
inline EmbedState restore_embeddings(const RunContext& rc, const Checkpoint& c) {
    EmbedState state;
    state.dims = embedding_dims(rc.cfg);
    if (c.embed_params.size() != state.dims.size())
        throw ValidationError("resume: checkpoint has " + std::to_string(c.embed_params.size()) +
                              " embedding levels, config expects " +
                              std::to_string(state.dims.size()));
    const Matrix features = embed_features(rc.data.train, rc.cfg.task.vocab);
    for (std::size_t k = 0; k < state.dims.size(); ++k) {
        EmbedNet net = make_embed_net(static_cast<int>(features.cols), rc.cfg.embed.hidden,
                                      state.dims[k], rc.cfg.activation,
                                      derive_seed(rc.run_seed, 0xe3b0 + k));
        if (c.embed_params[k].size() != net.theta.size())
            throw ValidationError("resume: embedding level " + std::to_string(k + 1) +
                                  " has wrong parameter count");
        net.theta = c.embed_params[k];
        state.nets.push_back(std::move(net));
    }
    state.map = make_manifold_map(param_count(rc.model), state.dims, rc.cfg.embed.manifold_seed);
    state.weights = AlignmentContext::uniform_weights(state.dims.size());
    state.train_mean_context = mean_context(state, features).levels;
    state.active = true;
    return state;
}

inline Checkpoint make_checkpoint(const RunContext& rc, const TrainerState& st,
                                  const BatchStream& stream) {
    Checkpoint c;
    c.run_id = rc.run_id;
    c.phase = st.phase;
    c.step = st.step;
    c.epoch = st.epoch;
    c.epoch_pos = st.epoch_pos;
    c.run_seed = rc.run_seed;
    c.params = st.w;
    for (const auto& net : st.embed.nets) c.embed_params.push_back(net.theta);
    c.prng_state = stream.epoch_state(st.epoch);
    c.optimizer_config_hash = optimizer_config_hash(rc.cfg.opt);
    c.config_digest = config_digest(rc.cfg);
    return c;
}

// Core loop shared by fresh runs and resumes.
inline SeedRunResult train_from(const RunContext& rc, TrainerState st) {
    fs::create_directories(rc.dir);
    const bool resuming = st.step > 0;
    std::ofstream metrics_out(rc.dir / "metrics.csv", std::ios::binary);
    std::ofstream timing_out(rc.dir / "timing.csv", std::ios::binary);
    std::ofstream geodesic_out;
    metrics_out << kMetricsHeader << '\n';
    timing_out << "step,wall_clock_ms\n";
    if (rc.cfg.diag.geodesic) {
        geodesic_out.open(rc.dir / "geodesic.csv", std::ios::binary);
        geodesic_out << "step,geodesic_length,straight_line_length,ratio\n";
    }

    SeedRunResult result;
    result.seed = rc.run_seed;
    result.run_id = rc.run_id;
    result.dir = rc.dir;

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&t0]() {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    BatchStream stream(rc.data.train, rc.cfg.protocol, rc.run_seed);
    std::vector<TaskBatch> batches = stream.epoch_batches(st.epoch);

    Vec prev_checkpoint_params = st.w;
    const TaskBatch geo_probe =
        rc.cfg.diag.geodesic ? probe_batch(rc.data, rc.cfg.diag.geodesic_probe) : TaskBatch{};

    try {
        if (!resuming) {
            const MetricsRecord r0 = evaluate(rc, st);
            metrics_out << metrics_csv_row(r0) << '\n';
            timing_out << "0," << format_double(elapsed_ms()) << '\n';
        }
        if (st.phase == 2 && rc.cfg.method == Method::cagm && rc.cfg.opt.alignment_active() &&
            !st.embed.active)
            st.embed = prepare_embeddings(rc.cfg, rc.data.train, rc.model, rc.run_seed);

        while (st.step < rc.total_steps) {
            const long long next_step = st.step + 1;
            if (next_step == rc.cfg.protocol.phase1_steps + 1) {
                st.phase = 2;
                if (rc.cfg.method == Method::cagm && rc.cfg.opt.alignment_active() &&
                    !st.embed.active)
                    st.embed = prepare_embeddings(rc.cfg, rc.data.train, rc.model, rc.run_seed);
            }
            if (st.epoch_pos == static_cast<long long>(batches.size())) {
                ++st.epoch;
                st.epoch_pos = 0;
                batches = stream.epoch_batches(st.epoch);
            }
            const TaskBatch& batch = batches[static_cast<std::size_t>(st.epoch_pos)];
            ++st.epoch_pos;

            const bool cagm_phase = st.phase == 2 && rc.cfg.method == Method::cagm;
            if (!cagm_phase) {
                st.w = sgd_step(st.w, batch, rc.model, rc.cfg.opt.eta);
            } else {
                AlignmentContext ctx;
                if (rc.cfg.opt.alignment_active()) {
                    ctx = mean_context(st.embed, embed_features(batch, rc.cfg.task.vocab));
                } else {
                    ctx = AlignmentContext::flat(ContextEmbedding{Vec{0.0}, 1});
                }
                st.w = cagm_step(st.w, batch, ctx, rc.cfg.opt, st.embed.map, rc.model);
            }
            st.step = next_step;
            st.flops += rc.flops_per_example_step * batch.size();
            if (cagm_phase && rc.cfg.opt.curvature_active()) {
                // grad R costs ~2d evals of R, each ~(2d+1) loss evals of ~2dB flops
                const std::uint64_t d = st.w.size();
                st.flops += 2 * d * (2 * d + 1) * 2 * d * batch.size();
            }

            const bool at_eval = st.step % rc.cfg.protocol.eval_every == 0 ||
                                 st.step == rc.total_steps;
            const bool at_checkpoint = st.step % rc.cfg.protocol.checkpoint_every == 0 ||
                                       st.step == rc.total_steps ||
                                       st.step == rc.cfg.protocol.phase1_steps;
            if (at_eval) {
                const MetricsRecord r = evaluate(rc, st);
                metrics_out << metrics_csv_row(r) << '\n';
                timing_out << st.step << ',' << format_double(elapsed_ms()) << '\n';
                result.final_record = r;
            }
            if (at_checkpoint) {
                save_checkpoint(make_checkpoint(rc, st, stream),
                                rc.dir / ("checkpoint-" + std::to_string(st.step) + ".json"));
                if (rc.cfg.diag.geodesic && st.step > 0 &&
                    norm2(sub(st.w, prev_checkpoint_params)) > 0.0) {
                    const Problem problem = model_problem(geo_probe, rc.model);
                    const GeodesicPath path = geodesic_path(
                        prev_checkpoint_params, st.w, problem, rc.cfg.opt.gamma,
                        rc.cfg.diag.geodesic_segments, rc.cfg.diag.geodesic_iters,
                        rc.cfg.diag.geodesic_step, rc.cfg.opt.hess_fd_step);
                    const GeodesicDiagnostics diag = geodesic_diagnostics(
                        path, prev_checkpoint_params, st.w, problem, rc.cfg.opt.gamma,
                        rc.cfg.opt.hess_fd_step);
                    geodesic_out << st.step << ',' << format_double(diag.geodesic_length) << ','
                                 << format_double(diag.straight_line_length) << ','
                                 << format_double(diag.ratio) << '\n';
                }
                prev_checkpoint_params = st.w;
            }
        }
    } catch (const NumericError& e) {
        // preserve partial results, mark the run failed
        MetricsRecord r;
        r.run_id = rc.run_id;
        r.phase = st.phase;
        r.step = st.step;
        r.epoch = st.epoch;
        r.failed = true;
        metrics_out << metrics_csv_row(r) << '\n';
        result.ok = false;
        result.error = e.what();
        result.final_record = r;
        result.final_params = st.w;
        return result;
    }

    result.final_params = st.w;
    return result;
}

}  // namespace detail

inline SeedRunResult run_single_seed(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                     const fs::path& dir) {
    validate_config(cfg);
    const detail::RunContext rc = detail::make_run_context(cfg, run_seed, dir);
    detail::TrainerState st;
    st.w = init_params(rc.model);
    return detail::train_from(rc, std::move(st));
}

// Continues a checkpointed run in a fresh directory; the continuation is
// bit-identical to the uninterrupted run from that step onward.
inline SeedRunResult resume_single_seed(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                        const fs::path& dir) {
    validate_config(cfg);
    const Checkpoint c = load_checkpoint(checkpoint);
    if (c.config_digest != config_digest(cfg))
        throw ValidationError("resume: checkpoint config digest " + c.config_digest +
                              " does not match configuration digest " + config_digest(cfg));
    const detail::RunContext rc = detail::make_run_context(cfg, c.run_seed, dir);

    detail::TrainerState st;
    st.w = c.params;
    st.phase = c.phase;
    st.step = c.step;
    st.epoch = c.epoch;
    st.epoch_pos = c.epoch_pos;
    if (!c.embed_params.empty()) st.embed = detail::restore_embeddings(rc, c);
    return detail::train_from(rc, std::move(st));
}

// ---------------------------------------------------------------------------
// multi-seed experiment
// ---------------------------------------------------------------------------

struct ExperimentResult {
    bool ok = true;
    std::vector<SeedRunResult> seeds;
    fs::path dir;
};

namespace detail {

inline std::string aggregate_json(const char* name, const Aggregate& a) {
    std::ostringstream out;
    out << "\"" << name << "\": {\"mean\": " << format_double(a.mean)
        << ", \"std\": " << format_double(a.stddev) << ", \"count\": " << a.count << "}";
    return out.str();
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
    validate_config(cfg);
    fs::create_directories(out_dir);
    ExperimentResult result;
    result.dir = out_dir;

    std::vector<double> train_losses, val_losses, val_accs, val_ppls;
    std::ostringstream timing;
    timing << "{\n";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const std::uint64_t seed = cfg.seeds[i];
        const auto t0 = std::chrono::steady_clock::now();
        SeedRunResult seed_result =
            run_single_seed(cfg, seed, out_dir / ("seed-" + std::to_string(seed)));
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        timing << "  \"seed-" << seed << "_ms\": " << format_double(ms);
        timing << (i + 1 < cfg.seeds.size() ? ",\n" : "\n");
        if (seed_result.ok) {
            train_losses.push_back(seed_result.final_record.train_loss);
            val_losses.push_back(seed_result.final_record.val_loss);
            if (seed_result.final_record.val_accuracy)
                val_accs.push_back(*seed_result.final_record.val_accuracy);
            if (seed_result.final_record.val_perplexity)
                val_ppls.push_back(*seed_result.final_record.val_perplexity);
        } else {
            result.ok = false;
        }
        result.seeds.push_back(std::move(seed_result));
    }
    timing << "}\n";
    detail::write_text_file(out_dir / "timing.json", timing.str());

    std::ostringstream summary;
    summary << "{\n";
    summary << "  \"aggregates\": {\n";
    summary << "    " << detail::aggregate_json("final_train_loss", aggregate(train_losses))
            << ",\n";
    summary << "    " << detail::aggregate_json("final_val_loss", aggregate(val_losses));
    if (!val_accs.empty())
        summary << ",\n    " << detail::aggregate_json("final_val_accuracy", aggregate(val_accs));
    if (!val_ppls.empty())
        summary << ",\n    "
                << detail::aggregate_json("final_val_perplexity", aggregate(val_ppls));
    summary << "\n  },\n";
    summary << "  \"config_digest\": \"" << config_digest(cfg) << "\",\n";
    summary << "  \"failed_seeds\": [";
    bool first = true;
    for (const auto& s : result.seeds)
        if (!s.ok) {
            if (!first) summary << ", ";
            summary << s.seed;
            first = false;
        }
    summary << "],\n";
    summary << "  \"method\": \"" << (cfg.method == Method::cagm ? "cagm" : "baseline")
            << "\",\n";
    summary << "  \"seeds\": [";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        summary << (i ? ", " : "") << cfg.seeds[i];
    summary << "],\n";
    summary << "  \"status\": \"" << (result.ok ? "ok" : "failed") << "\"\n";
    summary << "}\n";
    detail::write_text_file(out_dir / "summary.json", summary.str());
    return result;
}

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

struct GridCell {
    double eta = 0.0;
    int batch_size = 0;
    double lambda = 0.0;
    bool ok = false;
    std::string error;
    Aggregate val_loss;
    Aggregate val_accuracy;
    fs::path dir;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t best_index = 0;
    ExperimentConfig best_config;
};

// Cartesian product over the grid lists (singletons of the base value when a
// list is absent). Best cell = lowest mean final validation loss; ties break
// toward lower eta, then smaller batch, then smaller lambda. Failed cells are
// recorded and skipped.
inline GridResult grid_search(const ExperimentConfig& cfg, const fs::path& out_dir) {
    validate_config(cfg);
    fs::create_directories(out_dir);
    const std::vector<double> etas = cfg.grid.eta.empty() ? std::vector<double>{cfg.opt.eta}
                                                          : cfg.grid.eta;
    const std::vector<int> batch_sizes = cfg.grid.batch_size.empty()
                                             ? std::vector<int>{cfg.protocol.batch_size}
                                             : cfg.grid.batch_size;
    const std::vector<double> lambdas = cfg.grid.lambda.empty()
                                            ? std::vector<double>{cfg.opt.lambda}
                                            : cfg.grid.lambda;

    GridResult result;
    std::ostringstream table;
    table << "eta,batch_size,lambda,status,val_loss_mean,val_loss_std,val_accuracy_mean,"
             "val_accuracy_std,dir\n";
    int cell_id = 0;
    for (double eta : etas)
        for (int bs : batch_sizes)
            for (double lambda : lambdas) {
                ExperimentConfig cell_cfg = cfg;
                cell_cfg.grid = GridConfig{};
                cell_cfg.opt.eta = eta;
                cell_cfg.opt.lambda = lambda;
                cell_cfg.protocol.batch_size = bs;

                GridCell cell;
                cell.eta = eta;
                cell.batch_size = bs;
                cell.lambda = lambda;
                cell.dir = out_dir / ("cell-" + std::to_string(cell_id++));
                try {
                    const ExperimentResult run = run_experiment(cell_cfg, cell.dir);
                    std::vector<double> losses, accs;
                    for (const auto& s : run.seeds)
                        if (s.ok) {
                            losses.push_back(s.final_record.val_loss);
                            if (s.final_record.val_accuracy)
                                accs.push_back(*s.final_record.val_accuracy);
                        }
                    if (losses.empty()) {
                        cell.ok = false;
                        cell.error = "all seeds failed numerically";
                    } else {
                        cell.ok = true;
                        cell.val_loss = aggregate(losses);
                        cell.val_accuracy = aggregate(accs);
                    }
                } catch (const NumericError& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
                table << format_double(cell.eta) << ',' << cell.batch_size << ','
                      << format_double(cell.lambda) << ',' << (cell.ok ? "ok" : "failed") << ',';
                if (cell.ok) {
                    table << format_double(cell.val_loss.mean) << ','
                          << format_double(cell.val_loss.stddev) << ','
                          << (cell.val_accuracy.count ? format_double(cell.val_accuracy.mean)
                                                      : std::string{})
                          << ','
                          << (cell.val_accuracy.count ? format_double(cell.val_accuracy.stddev)
                                                      : std::string{});
                } else {
                    table << ",,,";
                }
                table << ',' << cell.dir.filename().string() << '\n';
                result.cells.push_back(std::move(cell));
            }
    detail::write_text_file(out_dir / "grid.csv", table.str());

    bool found = false;
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const GridCell& c = result.cells[i];
        if (!c.ok) continue;
        if (!found) {
            result.best_index = i;
            found = true;
            continue;
        }
        const GridCell& best = result.cells[result.best_index];
        const bool better =
            c.val_loss.mean < best.val_loss.mean ||
            (c.val_loss.mean == best.val_loss.mean &&
             (c.eta < best.eta || (c.eta == best.eta && (c.batch_size < best.batch_size ||
                                                         (c.batch_size == best.batch_size &&
                                                          c.lambda < best.lambda)))));
        if (better) result.best_index = i;
    }
    if (!found) throw NumericError("grid_search: every cell failed");

    result.best_config = cfg;
    result.best_config.grid = GridConfig{};
    result.best_config.opt.eta = result.cells[result.best_index].eta;
    result.best_config.opt.lambda = result.cells[result.best_index].lambda;
    result.best_config.protocol.batch_size = result.cells[result.best_index].batch_size;
    return result;
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

struct AblationRow {
    bool alignment = false;
    bool curvature = false;
    bool hierarchy = false;
    bool ok = true;
    Aggregate val_loss;
    Aggregate val_accuracy;
    Aggregate val_perplexity;
    std::string batch_digest;
    std::vector<SeedRunResult> seed_results;
};

// The full 2^3 flag lattice under shared seeds: every variant sees the same
// data in the same order (the logged batch digests prove it).
inline std::vector<AblationRow> run_ablations(const ExperimentConfig& cfg,
                                              const fs::path& out_dir) {
    validate_config(cfg);
    if (!(cfg.opt.lambda > 0.0) || !(cfg.opt.mu > 0.0))
        throw ValidationError(
            "run_ablations: opt.lambda and opt.mu must be positive so the toggled terms act");
    if (cfg.embed.hierarchy_dims.size() < 2)
        throw ValidationError("run_ablations: embed.hierarchy_dims needs >= 2 levels");
    fs::create_directories(out_dir);

    std::vector<AblationRow> rows;
    std::ostringstream table;
    table << "alignment,curvature,hierarchy,status,val_loss_mean,val_loss_std,"
             "val_accuracy_mean,val_accuracy_std,val_perplexity_mean,val_perplexity_std,"
             "batch_digest\n";
    for (int a = 0; a <= 1; ++a)
        for (int c = 0; c <= 1; ++c)
            for (int h = 0; h <= 1; ++h) {
                ExperimentConfig variant = cfg;
                variant.method = Method::cagm;
                variant.opt.use_alignment = a != 0;
                variant.opt.use_curvature = c != 0;
                variant.opt.use_hierarchy = h != 0;

                AblationRow row;
                row.alignment = a != 0;
                row.curvature = c != 0;
                row.hierarchy = h != 0;

                const fs::path dir =
                    out_dir / ("variant-a" + std::to_string(a) + "c" + std::to_string(c) + "h" +
                               std::to_string(h));
                const ExperimentResult run = run_experiment(variant, dir);
                row.ok = run.ok;
                std::vector<double> losses, accs, ppls;
                std::string digest_text;
                for (const auto& s : run.seeds) {
                    if (s.ok) {
                        losses.push_back(s.final_record.val_loss);
                        if (s.final_record.val_accuracy)
                            accs.push_back(*s.final_record.val_accuracy);
                        if (s.final_record.val_perplexity)
                            ppls.push_back(*s.final_record.val_perplexity);
                    }
                    const DatasetSplit data = build_dataset(variant.task, s.seed);
                    digest_text += BatchStream(data.train, variant.protocol, s.seed)
                                       .order_digest(variant.protocol.phase1_steps +
                                                     variant.protocol.phase2_steps);
                }
                row.val_loss = aggregate(losses);
                row.val_accuracy = aggregate(accs);
                row.val_perplexity = aggregate(ppls);
                row.batch_digest = hex64(fnv1a(digest_text));
                row.seed_results = run.seeds;

                table << (row.alignment ? 1 : 0) << ',' << (row.curvature ? 1 : 0) << ','
                      << (row.hierarchy ? 1 : 0) << ',' << (row.ok ? "ok" : "failed") << ','
                      << format_double(row.val_loss.mean) << ','
                      << format_double(row.val_loss.stddev) << ','
                      << (row.val_accuracy.count ? format_double(row.val_accuracy.mean)
                                                 : std::string{})
                      << ','
                      << (row.val_accuracy.count ? format_double(row.val_accuracy.stddev)
                                                 : std::string{})
                      << ','
                      << (row.val_perplexity.count ? format_double(row.val_perplexity.mean)
                                                   : std::string{})
                      << ','
                      << (row.val_perplexity.count ? format_double(row.val_perplexity.stddev)
                                                   : std::string{})
                      << ',' << row.batch_digest << '\n';
                rows.push_back(std::move(row));
            }
    detail::write_text_file(out_dir / "ablations.csv", table.str());
    return rows;
}

// ---------------------------------------------------------------------------
// plot data
// ---------------------------------------------------------------------------

// Tidy per-figure series from a finished run directory.
inline void emit_plotdata(const fs::path& run_dir, const fs::path& out_dir) {
    if (!fs::exists(run_dir)) throw ValidationError("plotdata: no such run dir: " + run_dir.string());
    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.is_directory() && entry.path().filename().string().rfind("seed-", 0) == 0)
            seed_dirs.push_back(entry.path());
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty())
        throw ValidationError("plotdata: no seed-* directories under " + run_dir.string());
    fs::create_directories(out_dir);

    std::ostringstream val_loss, val_acc, val_ppl, grad_norms, geodesic;
    val_loss << "seed,phase,step,epoch,val_loss\n";
    val_acc << "seed,phase,step,epoch,val_accuracy\n";
    val_ppl << "seed,phase,step,epoch,val_perplexity\n";
    grad_norms << "seed,step,grad_norm_loss,grad_norm_alignment,grad_norm_curvature\n";
    geodesic << "seed,step,geodesic_length,straight_line_length,ratio\n";
    bool any_acc = false, any_ppl = false, any_geo = false;

    for (const auto& dir : seed_dirs) {
        const std::string seed = dir.filename().string().substr(5);
        std::ifstream metrics_in(dir / "metrics.csv");
        if (!metrics_in)
            throw ValidationError("plotdata: missing metrics.csv under " + dir.string());
        std::string line;
        if (!std::getline(metrics_in, line) || line != kMetricsHeader)
            throw ValidationError("plotdata: metrics.csv header mismatch in " + dir.string() +
                                  " (expected columns: " + std::string(kMetricsHeader) + ")");
        while (std::getline(metrics_in, line)) {
            if (line.empty()) continue;
            const MetricsRecord r = metrics_from_csv_row(line);
            if (r.failed) continue;
            val_loss << seed << ',' << r.phase << ',' << r.step << ',' << r.epoch << ','
                     << format_double(r.val_loss) << '\n';
            if (r.val_accuracy) {
                any_acc = true;
                val_acc << seed << ',' << r.phase << ',' << r.step << ',' << r.epoch << ','
                        << format_double(*r.val_accuracy) << '\n';
            }
            if (r.val_perplexity) {
                any_ppl = true;
                val_ppl << seed << ',' << r.phase << ',' << r.step << ',' << r.epoch << ','
                        << format_double(*r.val_perplexity) << '\n';
            }
            grad_norms << seed << ',' << r.step << ',' << format_double(r.grad_norm_loss) << ','
                       << (r.grad_norm_alignment ? format_double(*r.grad_norm_alignment)
                                                 : std::string{})
                       << ','
                       << (r.grad_norm_curvature ? format_double(*r.grad_norm_curvature)
                                                 : std::string{})
                       << '\n';
        }
        std::ifstream geo_in(dir / "geodesic.csv");
        if (geo_in) {
            std::string geo_line;
            std::getline(geo_in, geo_line);  // header
            while (std::getline(geo_in, geo_line)) {
                if (geo_line.empty()) continue;
                any_geo = true;
                geodesic << seed << ',' << geo_line << '\n';
            }
        }
    }

    detail::write_text_file(out_dir / "plot-val-loss.csv", val_loss.str());
    detail::write_text_file(out_dir / "plot-grad-norms.csv", grad_norms.str());
    if (any_acc) detail::write_text_file(out_dir / "plot-val-accuracy.csv", val_acc.str());
    if (any_ppl) detail::write_text_file(out_dir / "plot-val-perplexity.csv", val_ppl.str());
    if (any_geo) detail::write_text_file(out_dir / "plot-geodesic.csv", geodesic.str());
}

}  // namespace cagm
