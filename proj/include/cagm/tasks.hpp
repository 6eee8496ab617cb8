#pragma once

// Deterministic synthetic dataset generators.
//
// Every generator is a pure function of its TaskSpec: all randomness flows
// through xoshiro256++ streams derived from (spec.seed, split tag), so a seed
// fully determines every sample, splits draw from disjoint streams, and
// train-set prefixes are stable when only the requested count changes.
//
// Families mirror the experiment axes: noise robustness (gaussian class
// clusters whose signal occupies the leading coordinates, hence the top PCA
// directions), domain shift (rotated + translated class geometry), training
// set size sweeps (nested prefix subsamples), long-range sequence
// classification (label carried by the first token), a first-order Markov
// token language with known entropy rate for perplexity work, and
// low-resource presets over the Markov language.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cagm/error.hpp"
#include "cagm/format.hpp"
#include "cagm/linalg.hpp"
#include "cagm/models.hpp"
#include "cagm/prng.hpp"

namespace cagm {

enum class TaskFamily {
    noisy_classify,
    domain_shift,
    size_sweep,
    long_range_seq,
    markov_lang,
    low_resource
};

enum class SizePreset { small, medium, large };

struct TaskSpec {
    TaskFamily family = TaskFamily::noisy_classify;
    int n_features = 8;
    int n_classes = 4;
    int vocab = 16;
    int n_train = 256;
    int n_val = 128;
    int n_test = 128;
    double noise_std = 0.5;
    double class_sep = 1.0;           // distance scale of the class-mean layout
    double shift_angle_deg = 0.0;     // domain shift: rotation in the (0,1) plane
    double shift_translation = 0.0;   // domain shift: translation along (1..1)/sqrt(n)
    double fraction = 1.0;            // size sweep
    int seq_len = 8;                  // long-range sequences: fixed length
    std::vector<int> seq_lengths;     // long-range sequences: length set (overrides seq_len)
    bool augment_token_swap = false;  // train-split augmentation: swap two distractor tokens
    int window = 8;                   // markov language: context window per example
    double markov_temperature = 1.0;  // spread of the random transition rows
    std::optional<Matrix> transition; // explicit transition matrix (tests, presets)
    SizePreset size_preset = SizePreset::small;
    TaskFamily base_family = TaskFamily::markov_lang;  // low_resource underlying family
    std::uint64_t seed = 1;
};

struct MarkovInfo {
    Matrix transition;
    Vec stationary;
    double entropy_rate = 0.0;  // nats/token; optimal perplexity = exp(entropy_rate)
};

struct DatasetSplit {
    TaskBatch train, val, test;
    TaskSpec provenance;
    std::optional<MarkovInfo> markov;
};

namespace detail {

inline constexpr std::uint64_t kTrainTag = 0x01, kValTag = 0x02, kTestTag = 0x03;

inline int bits_for_classes(int n_classes) {
    int bits = 1;
    while ((1 << bits) < n_classes) ++bits;
    return bits;
}

// Class means at scaled hypercube corners on the leading coordinates; all the
// between-class variance lives in those coordinates.
inline std::vector<Vec> class_means(const TaskSpec& spec) {
    if (spec.n_classes < 2) throw ValidationError("class layout: need n_classes >= 2");
    if (spec.n_features < 1) throw ValidationError("class layout: need n_features >= 1");
    const double max_classes = std::pow(2.0, std::min(spec.n_features, 62));
    if (static_cast<double>(spec.n_classes) > max_classes)
        throw ValidationError("class layout overflow: " + std::to_string(spec.n_classes) +
                              " classes do not fit in 2^" + std::to_string(spec.n_features) +
                              " corners");
    const int bits = bits_for_classes(spec.n_classes);
    std::vector<Vec> means(static_cast<std::size_t>(spec.n_classes),
                           Vec(static_cast<std::size_t>(spec.n_features), 0.0));
    for (int c = 0; c < spec.n_classes; ++c)
        for (int b = 0; b < bits; ++b)
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] =
                ((c >> b) & 1) ? spec.class_sep : -spec.class_sep;
    return means;
}

inline TaskBatch sample_gaussian_classify(const TaskSpec& spec, const std::vector<Vec>& means,
                                          int count, std::uint64_t stream_tag) {
    if (count < 1) throw ValidationError("gaussian classify: split count must be >= 1");
    Xoshiro256pp rng(derive_seed(spec.seed, stream_tag));
    TaskBatch batch;
    batch.kind = TaskKind::classification;
    batch.inputs = Matrix(static_cast<std::size_t>(count),
                          static_cast<std::size_t>(spec.n_features));
    batch.labels.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int c = i % spec.n_classes;  // balanced labels
        batch.labels[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < spec.n_features; ++j)
            batch.inputs(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                spec.noise_std * rng.gaussian();
    }
    return batch;
}

inline DatasetSplit classify_split(const TaskSpec& spec, const std::vector<Vec>& means) {
    DatasetSplit split;
    split.train = sample_gaussian_classify(spec, means, spec.n_train, kTrainTag);
    split.val = sample_gaussian_classify(spec, means, spec.n_val, kValTag);
    split.test = sample_gaussian_classify(spec, means, spec.n_test, kTestTag);
    split.provenance = spec;
    return split;
}

}  // namespace detail

inline DatasetSplit gen_noisy_classify(const TaskSpec& spec) {
    if (spec.noise_std < 0.0) throw ValidationError("gen_noisy_classify: noise_std must be >= 0");
    return detail::classify_split(spec, detail::class_means(spec));
}

// Nearest-class-mean decision rule: the Bayes classifier for equal-prior
// isotropic gaussian classes. Used as an analytic reference, not a model.
inline double nearest_mean_accuracy(const TaskBatch& batch, const std::vector<Vec>& means) {
    if (batch.kind != TaskKind::classification)
        throw ValidationError("nearest_mean_accuracy: classification batches only");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.inputs.rows; ++i) {
        const Vec x = batch.inputs.row(i);
        int best = 0;
        double best_d = 0.0;
        for (std::size_t c = 0; c < means.size(); ++c) {
            const Vec r = sub(x, means[c]);
            const double d = dot(r, r);
            if (c == 0 || d < best_d) {
                best = static_cast<int>(c);
                best_d = d;
            }
        }
        if (best == batch.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.inputs.rows);
}

inline std::vector<Vec> noisy_classify_means(const TaskSpec& spec) {
    return detail::class_means(spec);
}

struct DomainShiftData {
    DatasetSplit source;
    DatasetSplit target;
};

// Target domain = source class geometry rotated in the (0,1) plane and
// translated along the unit diagonal; labels preserved, same noise draws.
inline DomainShiftData gen_domain_shift(const TaskSpec& spec) {
    if (!std::isfinite(spec.shift_angle_deg) || !std::isfinite(spec.shift_translation))
        throw ValidationError("gen_domain_shift: shift parameters must be finite");
    if (spec.n_features < 2)
        throw ValidationError("gen_domain_shift: rotation needs n_features >= 2");
    const std::vector<Vec> means = detail::class_means(spec);

    const double angle = spec.shift_angle_deg * 3.14159265358979323846 / 180.0;
    const double c = std::cos(angle), s = std::sin(angle);
    const double tshift = spec.shift_translation / std::sqrt(static_cast<double>(spec.n_features));
    std::vector<Vec> shifted = means;
    for (Vec& m : shifted) {
        const double m0 = m[0], m1 = m[1];
        m[0] = c * m0 - s * m1;
        m[1] = s * m0 + c * m1;
        for (double& v : m) v += tshift;
    }

    DomainShiftData data;
    data.source = detail::classify_split(spec, means);
    data.target = detail::classify_split(spec, shifted);
    return data;
}

// Deterministic prefix subsample of the train split; val/test untouched.
inline DatasetSplit gen_size_sweep(const TaskSpec& spec, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ValidationError("gen_size_sweep: fraction must be in (0, 1]");
    DatasetSplit split = gen_noisy_classify(spec);
    const auto full = static_cast<double>(split.train.inputs.rows);
    const std::size_t keep = static_cast<std::size_t>(std::llround(fraction * full));
    if (keep == 0) throw ValidationError("gen_size_sweep: fraction leaves an empty subsample");
    Matrix inputs(keep, split.train.inputs.cols);
    for (std::size_t i = 0; i < keep; ++i)
        for (std::size_t j = 0; j < inputs.cols; ++j) inputs(i, j) = split.train.inputs(i, j);
    split.train.inputs = std::move(inputs);
    split.train.labels.resize(keep);
    split.provenance.fraction = fraction;
    return split;
}

namespace detail {

inline TaskBatch sample_long_range(const TaskSpec& spec, int count, std::uint64_t stream_tag) {
    if (count < 1) throw ValidationError("long_range: split count must be >= 1");
    Xoshiro256pp rng(derive_seed(spec.seed, stream_tag));
    const std::vector<int> lengths =
        spec.seq_lengths.empty() ? std::vector<int>{spec.seq_len} : spec.seq_lengths;
    for (int len : lengths)
        if (len < 2) throw ValidationError("long_range: sequence lengths must be >= 2");
    TaskBatch batch;
    batch.kind = TaskKind::sequence;
    batch.sequences.resize(static_cast<std::size_t>(count));
    batch.labels.resize(static_cast<std::size_t>(count));
    const int distractors = spec.vocab - spec.n_classes;
    if (distractors < 1)
        throw ValidationError("long_range: vocab must exceed n_classes to leave distractor ids");
    for (int i = 0; i < count; ++i) {
        const int len = lengths.size() == 1
                            ? lengths[0]
                            : lengths[static_cast<std::size_t>(rng.bounded(lengths.size()))];
        const int cls = i % spec.n_classes;  // label is a deterministic function of token[0]
        auto& seq = batch.sequences[static_cast<std::size_t>(i)];
        seq.resize(static_cast<std::size_t>(len));
        seq[0] = cls;
        for (int t = 1; t < len; ++t)
            seq[static_cast<std::size_t>(t)] =
                spec.n_classes + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(distractors)));
        batch.labels[static_cast<std::size_t>(i)] = cls;
    }
    return batch;
}

}  // namespace detail

namespace detail {

// Token-swap augmentation: exchange two random distractor positions per
// training sequence. The label-carrying first token is never touched.
inline void swap_distractors(TaskBatch& train, std::uint64_t seed) {
    Xoshiro256pp rng(derive_seed(seed, 0x5a9));
    for (auto& seq : train.sequences) {
        if (seq.size() < 3) continue;
        const std::size_t span = seq.size() - 1;
        const std::size_t a = 1 + static_cast<std::size_t>(rng.bounded(span));
        const std::size_t b = 1 + static_cast<std::size_t>(rng.bounded(span));
        std::swap(seq[a], seq[b]);
    }
}

}  // namespace detail

// Sequences whose label is carried only by the first token; everything after
// it is an uninformative distractor.
inline DatasetSplit gen_long_range_seq(const TaskSpec& spec) {
    DatasetSplit split;
    split.train = detail::sample_long_range(spec, spec.n_train, detail::kTrainTag);
    split.val = detail::sample_long_range(spec, spec.n_val, detail::kValTag);
    split.test = detail::sample_long_range(spec, spec.n_test, detail::kTestTag);
    if (spec.augment_token_swap) detail::swap_distractors(split.train, spec.seed);
    split.provenance = spec;
    return split;
}

namespace detail {

inline Matrix random_transition(const TaskSpec& spec) {
    Xoshiro256pp rng(derive_seed(spec.seed, 0x7a));
    const std::size_t v = static_cast<std::size_t>(spec.vocab);
    Matrix t(v, v);
    for (std::size_t i = 0; i < v; ++i) {
        double row_max = -1e300;
        for (std::size_t j = 0; j < v; ++j) {
            t(i, j) = spec.markov_temperature * rng.gaussian();
            row_max = std::max(row_max, t(i, j));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < v; ++j) {
            t(i, j) = std::exp(t(i, j) - row_max);
            sum += t(i, j);
        }
        for (std::size_t j = 0; j < v; ++j) t(i, j) /= sum;
    }
    return t;
}

inline void validate_transition(const Matrix& t, int vocab) {
    if (t.rows != static_cast<std::size_t>(vocab) || t.cols != static_cast<std::size_t>(vocab))
        throw ValidationError("markov: transition matrix must be vocab x vocab");
    for (std::size_t i = 0; i < t.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < t.cols; ++j) {
            if (t(i, j) < 0.0)
                throw ValidationError("markov: negative transition probability in row " +
                                      std::to_string(i));
            sum += t(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("markov: row " + std::to_string(i) +
                                  " does not sum to 1 (got " + format_double(sum) + ")");
    }
}

inline Vec stationary_distribution(const Matrix& t) {
    const std::size_t v = t.rows;
    Vec pi(v, 1.0 / static_cast<double>(v));
    for (int iter = 0; iter < 2000; ++iter) {
        Vec next(v, 0.0);
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t j = 0; j < v; ++j) next[j] += pi[i] * t(i, j);
        double delta = 0.0;
        for (std::size_t j = 0; j < v; ++j) delta = std::max(delta, std::abs(next[j] - pi[j]));
        pi = std::move(next);
        if (delta < 1e-14) break;
    }
    return pi;
}

inline double entropy_rate(const Matrix& t, const Vec& pi) {
    double h = 0.0;
    for (std::size_t i = 0; i < t.rows; ++i)
        for (std::size_t j = 0; j < t.cols; ++j)
            if (t(i, j) > 0.0) h -= pi[i] * t(i, j) * std::log(t(i, j));
    return h;
}

inline int markov_step(const Matrix& t, int state, Xoshiro256pp& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t j = 0; j < t.cols; ++j) {
        cum += t(static_cast<std::size_t>(state), j);
        if (u < cum) return static_cast<int>(j);
    }
    return static_cast<int>(t.cols) - 1;  // u landed in roundoff tail
}

inline TaskBatch sample_markov(const TaskSpec& spec, const Matrix& t, int count,
                               std::uint64_t stream_tag) {
    if (count < 1) throw ValidationError("markov: split count must be >= 1");
    if (spec.window < 1) throw ValidationError("markov: window must be >= 1");
    Xoshiro256pp rng(derive_seed(spec.seed, stream_tag));
    int state = 0;
    for (int burn = 0; burn < 64; ++burn) state = markov_step(t, state, rng);
    std::vector<int> stream;
    stream.reserve(static_cast<std::size_t>(count + spec.window));
    for (int i = 0; i < count + spec.window; ++i) {
        stream.push_back(state);
        state = markov_step(t, state, rng);
    }
    TaskBatch batch;
    batch.kind = TaskKind::sequence;
    batch.sequences.resize(static_cast<std::size_t>(count));
    batch.labels.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        auto& seq = batch.sequences[static_cast<std::size_t>(i)];
        seq.assign(stream.begin() + i, stream.begin() + i + spec.window);
        batch.labels[static_cast<std::size_t>(i)] = stream[static_cast<std::size_t>(i + spec.window)];
    }
    return batch;
}

}  // namespace detail

// Token windows from a first-order Markov chain; each example predicts the
// next token. The chain's entropy rate (optimal achievable mean CE) is stored
// alongside the data.
inline DatasetSplit gen_markov_lang(const TaskSpec& spec) {
    if (spec.vocab < 2) throw ValidationError("gen_markov_lang: vocab must be >= 2");
    const Matrix t = spec.transition ? *spec.transition : detail::random_transition(spec);
    detail::validate_transition(t, spec.vocab);

    DatasetSplit split;
    split.train = detail::sample_markov(spec, t, spec.n_train, detail::kTrainTag);
    split.val = detail::sample_markov(spec, t, spec.n_val, detail::kValTag);
    split.test = detail::sample_markov(spec, t, spec.n_test, detail::kTestTag);
    split.provenance = spec;

    MarkovInfo info;
    info.stationary = detail::stationary_distribution(t);
    info.entropy_rate = detail::entropy_rate(t, info.stationary);
    info.transition = t;
    split.markov = std::move(info);
    return split;
}

inline int low_resource_train_count(SizePreset preset) {
    switch (preset) {
        case SizePreset::small: return 64;
        case SizePreset::medium: return 512;
        case SizePreset::large: return 4096;
    }
    throw ValidationError("low_resource: unknown size preset");
}

// Sample-count scarcity presets over the synthetic language (or the gaussian
// classification family). Presets nest as prefixes under one seed.
inline DatasetSplit gen_low_resource(const TaskSpec& spec) {
    TaskSpec scaled = spec;
    scaled.n_train = low_resource_train_count(spec.size_preset);
    if (spec.base_family == TaskFamily::markov_lang) return gen_markov_lang(scaled);
    if (spec.base_family == TaskFamily::noisy_classify) return gen_noisy_classify(scaled);
    throw ValidationError("gen_low_resource: base family must be markov_lang or noisy_classify");
}

inline DatasetSplit generate(const TaskSpec& spec) {
    switch (spec.family) {
        case TaskFamily::noisy_classify: return gen_noisy_classify(spec);
        case TaskFamily::domain_shift: return gen_domain_shift(spec).source;
        case TaskFamily::size_sweep: return gen_size_sweep(spec, spec.fraction);
        case TaskFamily::long_range_seq: return gen_long_range_seq(spec);
        case TaskFamily::markov_lang: return gen_markov_lang(spec);
        case TaskFamily::low_resource: return gen_low_resource(spec);
    }
    throw ValidationError("generate: unknown task family");
}

namespace detail {

inline TaskBatch subset(const TaskBatch& batch, const std::vector<std::size_t>& idx) {
    TaskBatch out;
    out.kind = batch.kind;
    if (batch.kind == TaskKind::sequence) {
        for (std::size_t i : idx) {
            out.sequences.push_back(batch.sequences[i]);
            out.labels.push_back(batch.labels[i]);
        }
        return out;
    }
    out.inputs = Matrix(idx.size(), batch.inputs.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < batch.inputs.cols; ++j)
            out.inputs(r, j) = batch.inputs(idx[r], j);
    if (batch.kind == TaskKind::regression) {
        out.targets = Matrix(idx.size(), batch.targets.cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < batch.targets.cols; ++j)
                out.targets(r, j) = batch.targets(idx[r], j);
    } else {
        for (std::size_t i : idx) out.labels.push_back(batch.labels[i]);
    }
    return out;
}

inline std::size_t example_tokens(const TaskBatch& batch, std::size_t i) {
    return batch.kind == TaskKind::sequence ? batch.sequences[i].size() : batch.inputs.cols;
}

}  // namespace detail

// Length-bucketed batching: shuffle deterministically, group by exact token
// count, pack each group into batches of floor(max_tokens / length) examples.
// Every example appears exactly once; no batch exceeds max_tokens.
inline std::vector<TaskBatch> dynamic_batches(const TaskBatch& data, std::size_t max_tokens,
                                              std::uint64_t seed) {
    const std::size_t n = data.size();
    if (n == 0) throw ValidationError("dynamic_batches: empty dataset");
    for (std::size_t i = 0; i < n; ++i)
        if (detail::example_tokens(data, i) > max_tokens)
            throw ValidationError("dynamic_batches: example " + std::to_string(i) + " has " +
                                  std::to_string(detail::example_tokens(data, i)) +
                                  " tokens, above max_tokens " + std::to_string(max_tokens));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Xoshiro256pp rng(derive_seed(seed, 0xb41c));
    shuffle(order, rng);

    std::vector<std::size_t> lengths;  // distinct lengths, ascending
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t len = detail::example_tokens(data, i);
        if (std::find(lengths.begin(), lengths.end(), len) == lengths.end())
            lengths.push_back(len);
    }
    std::sort(lengths.begin(), lengths.end());

    std::vector<TaskBatch> batches;
    for (std::size_t len : lengths) {
        const std::size_t cap = std::max<std::size_t>(1, max_tokens / std::max<std::size_t>(1, len));
        std::vector<std::size_t> bucket;
        for (std::size_t i : order)
            if (detail::example_tokens(data, i) == len) bucket.push_back(i);
        for (std::size_t start = 0; start < bucket.size(); start += cap) {
            const std::size_t stop = std::min(bucket.size(), start + cap);
            batches.push_back(detail::subset(
                data, std::vector<std::size_t>(bucket.begin() + static_cast<std::ptrdiff_t>(start),
                                               bucket.begin() + static_cast<std::ptrdiff_t>(stop))));
        }
    }
    return batches;
}

// Line-delimited text dump: one example per line, features/tokens separated
// by single spaces, then a tab, then the target (label id, next-token id, or
// space-separated regression targets).
inline void save_batch(const TaskBatch& batch, std::ostream& out) {
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.kind == TaskKind::sequence) {
            const auto& seq = batch.sequences[i];
            for (std::size_t t = 0; t < seq.size(); ++t)
                out << (t ? " " : "") << seq[t];
        } else {
            for (std::size_t j = 0; j < batch.inputs.cols; ++j)
                out << (j ? " " : "") << format_double(batch.inputs(i, j));
        }
        out << '\t';
        if (batch.kind == TaskKind::regression) {
            for (std::size_t j = 0; j < batch.targets.cols; ++j)
                out << (j ? " " : "") << format_double(batch.targets(i, j));
        } else {
            out << batch.labels[i];
        }
        out << '\n';
    }
}

inline TaskBatch load_batch(std::istream& in, TaskKind kind) {
    TaskBatch batch;
    batch.kind = kind;
    std::vector<Vec> feature_rows;
    std::vector<Vec> target_rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError("load_batch: missing tab separator in line '" + line + "'");
        std::istringstream left(line.substr(0, tab));
        std::istringstream right(line.substr(tab + 1));
        std::string tok;
        if (kind == TaskKind::sequence) {
            std::vector<int> seq;
            while (left >> tok) seq.push_back(static_cast<int>(parse_int(tok)));
            batch.sequences.push_back(std::move(seq));
        } else {
            Vec row;
            while (left >> tok) row.push_back(parse_double(tok));
            feature_rows.push_back(std::move(row));
        }
        if (kind == TaskKind::regression) {
            Vec row;
            while (right >> tok) row.push_back(parse_double(tok));
            target_rows.push_back(std::move(row));
        } else {
            right >> tok;
            batch.labels.push_back(static_cast<int>(parse_int(tok)));
        }
    }
    if (kind != TaskKind::sequence && !feature_rows.empty()) {
        batch.inputs = Matrix(feature_rows.size(), feature_rows[0].size());
        for (std::size_t i = 0; i < feature_rows.size(); ++i) {
            if (feature_rows[i].size() != batch.inputs.cols)
                throw ValidationError("load_batch: ragged feature rows");
            for (std::size_t j = 0; j < batch.inputs.cols; ++j)
                batch.inputs(i, j) = feature_rows[i][j];
        }
    }
    if (kind == TaskKind::regression && !target_rows.empty()) {
        batch.targets = Matrix(target_rows.size(), target_rows[0].size());
        for (std::size_t i = 0; i < target_rows.size(); ++i)
            for (std::size_t j = 0; j < batch.targets.cols; ++j)
                batch.targets(i, j) = target_rows[i][j];
    }
    return batch;
}

}  // namespace cagm
