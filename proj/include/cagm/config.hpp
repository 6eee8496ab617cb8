#pragma once

// Experiment configuration: a flat, typed key-value text format.
//
//   # comment
//   task.family = noisy_classify
//   opt.eta = 0.05
//   seeds = 1,2,3
//
// Unknown keys are errors (they are usually typos), every key is typed, and
// the full key list lives in kConfigKeys below and in the README. The
// canonical serialization (canonical_config_text) fixes key order and number
// formatting and is what config digests are computed over.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cagm/error.hpp"
#include "cagm/format.hpp"
#include "cagm/models.hpp"
#include "cagm/optimizer.hpp"
#include "cagm/tasks.hpp"

namespace cagm {

enum class Method { baseline_sgd, cagm };

struct EmbedConfig {
    int dim = 2;                      // d_e of the flat level
    std::vector<int> hierarchy_dims;  // strictly decreasing; used when hierarchy is on
    std::vector<int> hidden;          // hidden widths of the supplementary net
    int steps = 400;
    double lr = 0.05;
    std::uint64_t manifold_seed = 42;  // the parameter-space projection is fixed, not per-run
};

struct ProtocolConfig {
    int phase1_steps = 200;
    int phase2_steps = 200;
    int eval_every = 20;
    int checkpoint_every = 100;
    int batch_size = 32;
    int max_tokens = 0;  // > 0 switches sequence tasks to token-budget batching
};

struct DiagnosticsConfig {
    bool geodesic = false;  // log geodesic diagnostics between checkpoints
    int geodesic_segments = 8;
    int geodesic_iters = 20;
    double geodesic_step = 0.1;
    int geodesic_probe = 16;  // examples in the fixed metric probe batch
};

struct GridConfig {
    std::vector<double> eta;
    std::vector<double> lambda;
    std::vector<int> batch_size;
};

struct ExperimentConfig {
    Method method = Method::cagm;
    TaskSpec task;
    std::vector<int> model_hidden = {16};
    Activation activation = Activation::tanh;
    int model_embed_dim = 8;  // token embedding width (sequence models)
    int model_window = 0;     // pooling window; 0 = whole sequence
    OptimizerConfig opt;
    EmbedConfig embed;
    ProtocolConfig protocol;
    DiagnosticsConfig diag;
    GridConfig grid;
    std::vector<std::uint64_t> seeds = {1};
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::string current;
    std::istringstream in(s);
    while (std::getline(in, current, ',')) {
        current = trim(current);
        if (!current.empty()) items.push_back(current);
    }
    return items;
}

class KeyReader {
public:
    explicit KeyReader(std::map<std::string, std::string> entries)
        : entries_(std::move(entries)) {}

    std::optional<std::string> take(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        std::string value = it->second;
        entries_.erase(it);
        return value;
    }

    void take_double(const std::string& key, double& out) {
        if (auto v = take(key)) out = parse_double(*v);
    }
    void take_int(const std::string& key, int& out) {
        if (auto v = take(key)) out = static_cast<int>(parse_int(*v));
    }
    void take_u64(const std::string& key, std::uint64_t& out) {
        if (auto v = take(key)) out = parse_u64(*v);
    }
    void take_bool(const std::string& key, bool& out) {
        if (auto v = take(key)) {
            if (*v == "true" || *v == "1") out = true;
            else if (*v == "false" || *v == "0") out = false;
            else throw ValidationError("config: key '" + key + "' expects a bool, got '" + *v + "'");
        }
    }
    void take_int_list(const std::string& key, std::vector<int>& out) {
        if (auto v = take(key)) {
            out.clear();
            for (const auto& item : split_list(*v)) out.push_back(static_cast<int>(parse_int(item)));
        }
    }
    void take_double_list(const std::string& key, std::vector<double>& out) {
        if (auto v = take(key)) {
            out.clear();
            for (const auto& item : split_list(*v)) out.push_back(parse_double(item));
        }
    }
    void take_u64_list(const std::string& key, std::vector<std::uint64_t>& out) {
        if (auto v = take(key)) {
            out.clear();
            for (const auto& item : split_list(*v))
                out.push_back(parse_u64(item));
        }
    }

    void finish() const {
        if (entries_.empty()) return;
        std::string names;
        for (const auto& [key, value] : entries_) {
            if (!names.empty()) names += ", ";
            names += key;
        }
        throw ValidationError("config: unknown key(s): " + names);
    }

private:
    std::map<std::string, std::string> entries_;
};

inline TaskFamily parse_family(const std::string& s) {
    if (s == "noisy_classify") return TaskFamily::noisy_classify;
    if (s == "domain_shift") return TaskFamily::domain_shift;
    if (s == "size_sweep") return TaskFamily::size_sweep;
    if (s == "long_range_seq") return TaskFamily::long_range_seq;
    if (s == "markov_lang") return TaskFamily::markov_lang;
    if (s == "low_resource") return TaskFamily::low_resource;
    throw ValidationError("config: unknown task family '" + s + "'");
}

inline std::string family_name(TaskFamily f) {
    switch (f) {
        case TaskFamily::noisy_classify: return "noisy_classify";
        case TaskFamily::domain_shift: return "domain_shift";
        case TaskFamily::size_sweep: return "size_sweep";
        case TaskFamily::long_range_seq: return "long_range_seq";
        case TaskFamily::markov_lang: return "markov_lang";
        case TaskFamily::low_resource: return "low_resource";
    }
    return "?";
}

inline SizePreset parse_preset(const std::string& s) {
    if (s == "small") return SizePreset::small;
    if (s == "medium") return SizePreset::medium;
    if (s == "large") return SizePreset::large;
    throw ValidationError("config: unknown size preset '" + s + "'");
}

inline std::string preset_name(SizePreset p) {
    switch (p) {
        case SizePreset::small: return "small";
        case SizePreset::medium: return "medium";
        case SizePreset::large: return "large";
    }
    return "?";
}

template <typename T>
std::string join_list(const std::vector<T>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_same_v<T, double>)
            s += format_double(items[i]);
        else
            s += std::to_string(items[i]);
    }
    return s;
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& cfg) {
    cfg.opt.validate();
    if (cfg.seeds.empty()) throw ValidationError("config: seeds must be non-empty");
    if (cfg.protocol.phase1_steps < 0 || cfg.protocol.phase2_steps < 0)
        throw ValidationError("config: protocol phase step counts must be >= 0");
    if (cfg.protocol.phase1_steps + cfg.protocol.phase2_steps < 1)
        throw ValidationError("config: at least one training step required");
    if (cfg.protocol.eval_every < 1)
        throw ValidationError("config: protocol.eval_every must be >= 1");
    if (cfg.protocol.checkpoint_every < 1)
        throw ValidationError("config: protocol.checkpoint_every must be >= 1");
    if (cfg.protocol.batch_size < 1)
        throw ValidationError("config: protocol.batch_size must be >= 1");
    if (cfg.protocol.max_tokens < 0)
        throw ValidationError("config: protocol.max_tokens must be >= 0");
    if (cfg.embed.dim < 1) throw ValidationError("config: embed.dim must be >= 1");
    if (cfg.embed.steps < 1) throw ValidationError("config: embed.steps must be >= 1");
    if (cfg.embed.lr <= 0.0) throw ValidationError("config: embed.lr must be positive");
    for (int h : cfg.model_hidden)
        if (h < 1) throw ValidationError("config: model.hidden entries must be >= 1");
    if (cfg.model_embed_dim < 1)
        throw ValidationError("config: model.embed_dim must be >= 1");
    if (cfg.opt.use_hierarchy && cfg.embed.hierarchy_dims.size() < 2)
        throw ValidationError(
            "config: opt.use_hierarchy needs embed.hierarchy_dims with >= 2 levels");
    if (cfg.diag.geodesic_segments < 1 || cfg.diag.geodesic_probe < 1)
        throw ValidationError("config: diag.geodesic controls must be >= 1");
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " is not 'key = value': '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError("config: empty key on line " + std::to_string(line_no));
        if (entries.count(key))
            throw ValidationError("config: duplicate key '" + key + "'");
        entries[key] = value;
    }

    ExperimentConfig cfg;
    detail::KeyReader reader(std::move(entries));

    if (auto v = reader.take("method")) {
        if (*v == "baseline") cfg.method = Method::baseline_sgd;
        else if (*v == "cagm") cfg.method = Method::cagm;
        else throw ValidationError("config: method must be baseline|cagm, got '" + *v + "'");
    }

    if (auto v = reader.take("task.family")) cfg.task.family = detail::parse_family(*v);
    reader.take_int("task.n_features", cfg.task.n_features);
    reader.take_int("task.n_classes", cfg.task.n_classes);
    reader.take_int("task.vocab", cfg.task.vocab);
    reader.take_int("task.n_train", cfg.task.n_train);
    reader.take_int("task.n_val", cfg.task.n_val);
    reader.take_int("task.n_test", cfg.task.n_test);
    reader.take_double("task.noise_std", cfg.task.noise_std);
    reader.take_double("task.class_sep", cfg.task.class_sep);
    reader.take_double("task.shift_angle_deg", cfg.task.shift_angle_deg);
    reader.take_double("task.shift_translation", cfg.task.shift_translation);
    reader.take_double("task.fraction", cfg.task.fraction);
    reader.take_int("task.seq_len", cfg.task.seq_len);
    reader.take_int_list("task.seq_lengths", cfg.task.seq_lengths);
    reader.take_int("task.window", cfg.task.window);
    reader.take_bool("task.augment_token_swap", cfg.task.augment_token_swap);
    reader.take_double("task.markov_temperature", cfg.task.markov_temperature);
    if (auto v = reader.take("task.size_preset")) cfg.task.size_preset = detail::parse_preset(*v);
    if (auto v = reader.take("task.base_family")) cfg.task.base_family = detail::parse_family(*v);
    reader.take_u64("task.seed", cfg.task.seed);

    reader.take_int_list("model.hidden", cfg.model_hidden);
    if (auto v = reader.take("model.activation")) {
        if (*v == "tanh") cfg.activation = Activation::tanh;
        else if (*v == "relu") cfg.activation = Activation::relu;
        else throw ValidationError("config: model.activation must be tanh|relu, got '" + *v + "'");
    }
    reader.take_int("model.embed_dim", cfg.model_embed_dim);
    reader.take_int("model.window", cfg.model_window);

    reader.take_double("opt.eta", cfg.opt.eta);
    reader.take_double("opt.lambda", cfg.opt.lambda);
    reader.take_double("opt.mu", cfg.opt.mu);
    reader.take_double("opt.gamma", cfg.opt.gamma);
    if (auto v = reader.take("opt.sign_mode")) {
        if (*v == "descent") cfg.opt.sign_mode = SignMode::descent;
        else if (*v == "literal") cfg.opt.sign_mode = SignMode::literal;
        else throw ValidationError("config: opt.sign_mode must be descent|literal, got '" + *v + "'");
    }
    reader.take_bool("opt.use_alignment", cfg.opt.use_alignment);
    reader.take_bool("opt.use_curvature", cfg.opt.use_curvature);
    reader.take_bool("opt.use_hierarchy", cfg.opt.use_hierarchy);
    reader.take_double("opt.hess_fd_step", cfg.opt.hess_fd_step);
    reader.take_double("opt.curv_fd_step", cfg.opt.curv_fd_step);
    reader.take_int("opt.curvature_dim_cap", cfg.opt.curvature_dim_cap);

    reader.take_int("embed.dim", cfg.embed.dim);
    reader.take_int_list("embed.hierarchy_dims", cfg.embed.hierarchy_dims);
    reader.take_int_list("embed.hidden", cfg.embed.hidden);
    reader.take_int("embed.steps", cfg.embed.steps);
    reader.take_double("embed.lr", cfg.embed.lr);
    reader.take_u64("embed.manifold_seed", cfg.embed.manifold_seed);

    reader.take_int("protocol.phase1_steps", cfg.protocol.phase1_steps);
    reader.take_int("protocol.phase2_steps", cfg.protocol.phase2_steps);
    reader.take_int("protocol.eval_every", cfg.protocol.eval_every);
    reader.take_int("protocol.checkpoint_every", cfg.protocol.checkpoint_every);
    reader.take_int("protocol.batch_size", cfg.protocol.batch_size);
    reader.take_int("protocol.max_tokens", cfg.protocol.max_tokens);

    reader.take_bool("diag.geodesic", cfg.diag.geodesic);
    reader.take_int("diag.geodesic_segments", cfg.diag.geodesic_segments);
    reader.take_int("diag.geodesic_iters", cfg.diag.geodesic_iters);
    reader.take_double("diag.geodesic_step", cfg.diag.geodesic_step);
    reader.take_int("diag.geodesic_probe", cfg.diag.geodesic_probe);

    reader.take_double_list("grid.eta", cfg.grid.eta);
    reader.take_double_list("grid.lambda", cfg.grid.lambda);
    reader.take_int_list("grid.batch_size", cfg.grid.batch_size);

    reader.take_u64_list("seeds", cfg.seeds);

    reader.finish();
    validate_config(cfg);
    return cfg;
}

// Fixed key order, fixed number formatting: the digest input.
inline std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "method = " << (cfg.method == Method::cagm ? "cagm" : "baseline") << '\n';
    out << "task.family = " << detail::family_name(cfg.task.family) << '\n';
    out << "task.n_features = " << cfg.task.n_features << '\n';
    out << "task.n_classes = " << cfg.task.n_classes << '\n';
    out << "task.vocab = " << cfg.task.vocab << '\n';
    out << "task.n_train = " << cfg.task.n_train << '\n';
    out << "task.n_val = " << cfg.task.n_val << '\n';
    out << "task.n_test = " << cfg.task.n_test << '\n';
    out << "task.noise_std = " << format_double(cfg.task.noise_std) << '\n';
    out << "task.class_sep = " << format_double(cfg.task.class_sep) << '\n';
    out << "task.shift_angle_deg = " << format_double(cfg.task.shift_angle_deg) << '\n';
    out << "task.shift_translation = " << format_double(cfg.task.shift_translation) << '\n';
    out << "task.fraction = " << format_double(cfg.task.fraction) << '\n';
    out << "task.seq_len = " << cfg.task.seq_len << '\n';
    out << "task.seq_lengths = " << detail::join_list(cfg.task.seq_lengths) << '\n';
    out << "task.window = " << cfg.task.window << '\n';
    out << "task.augment_token_swap = " << (cfg.task.augment_token_swap ? "true" : "false")
        << '\n';
    out << "task.markov_temperature = " << format_double(cfg.task.markov_temperature) << '\n';
    out << "task.size_preset = " << detail::preset_name(cfg.task.size_preset) << '\n';
    out << "task.base_family = " << detail::family_name(cfg.task.base_family) << '\n';
    out << "task.seed = " << cfg.task.seed << '\n';
    out << "model.hidden = " << detail::join_list(cfg.model_hidden) << '\n';
    out << "model.activation = " << (cfg.activation == Activation::tanh ? "tanh" : "relu") << '\n';
    out << "model.embed_dim = " << cfg.model_embed_dim << '\n';
    out << "model.window = " << cfg.model_window << '\n';
    out << "opt.eta = " << format_double(cfg.opt.eta) << '\n';
    out << "opt.lambda = " << format_double(cfg.opt.lambda) << '\n';
    out << "opt.mu = " << format_double(cfg.opt.mu) << '\n';
    out << "opt.gamma = " << format_double(cfg.opt.gamma) << '\n';
    out << "opt.sign_mode = " << (cfg.opt.sign_mode == SignMode::descent ? "descent" : "literal")
        << '\n';
    out << "opt.use_alignment = " << (cfg.opt.use_alignment ? "true" : "false") << '\n';
    out << "opt.use_curvature = " << (cfg.opt.use_curvature ? "true" : "false") << '\n';
    out << "opt.use_hierarchy = " << (cfg.opt.use_hierarchy ? "true" : "false") << '\n';
    out << "opt.hess_fd_step = " << format_double(cfg.opt.hess_fd_step) << '\n';
    out << "opt.curv_fd_step = " << format_double(cfg.opt.curv_fd_step) << '\n';
    out << "opt.curvature_dim_cap = " << cfg.opt.curvature_dim_cap << '\n';
    out << "embed.dim = " << cfg.embed.dim << '\n';
    out << "embed.hierarchy_dims = " << detail::join_list(cfg.embed.hierarchy_dims) << '\n';
    out << "embed.hidden = " << detail::join_list(cfg.embed.hidden) << '\n';
    out << "embed.steps = " << cfg.embed.steps << '\n';
    out << "embed.lr = " << format_double(cfg.embed.lr) << '\n';
    out << "embed.manifold_seed = " << cfg.embed.manifold_seed << '\n';
    out << "protocol.phase1_steps = " << cfg.protocol.phase1_steps << '\n';
    out << "protocol.phase2_steps = " << cfg.protocol.phase2_steps << '\n';
    out << "protocol.eval_every = " << cfg.protocol.eval_every << '\n';
    out << "protocol.checkpoint_every = " << cfg.protocol.checkpoint_every << '\n';
    out << "protocol.batch_size = " << cfg.protocol.batch_size << '\n';
    out << "protocol.max_tokens = " << cfg.protocol.max_tokens << '\n';
    out << "diag.geodesic = " << (cfg.diag.geodesic ? "true" : "false") << '\n';
    out << "diag.geodesic_segments = " << cfg.diag.geodesic_segments << '\n';
    out << "diag.geodesic_iters = " << cfg.diag.geodesic_iters << '\n';
    out << "diag.geodesic_step = " << format_double(cfg.diag.geodesic_step) << '\n';
    out << "diag.geodesic_probe = " << cfg.diag.geodesic_probe << '\n';
    out << "grid.eta = " << detail::join_list(cfg.grid.eta) << '\n';
    out << "grid.lambda = " << detail::join_list(cfg.grid.lambda) << '\n';
    out << "grid.batch_size = " << detail::join_list(cfg.grid.batch_size) << '\n';
    out << "seeds = " << detail::join_list(std::vector<long long>(cfg.seeds.begin(),
                                                                  cfg.seeds.end()))
        << '\n';
    return out.str();
}

inline std::string config_digest(const ExperimentConfig& cfg) {
    return hex64(fnv1a(canonical_config_text(cfg)));
}

inline std::string optimizer_config_hash(const OptimizerConfig& opt) {
    std::ostringstream out;
    out << format_double(opt.eta) << '|' << format_double(opt.lambda) << '|'
        << format_double(opt.mu) << '|' << format_double(opt.gamma) << '|'
        << (opt.sign_mode == SignMode::descent ? "descent" : "literal") << '|'
        << opt.use_alignment << opt.use_curvature << opt.use_hierarchy << '|'
        << format_double(opt.hess_fd_step) << '|' << format_double(opt.curv_fd_step) << '|'
        << opt.curvature_dim_cap;
    return hex64(fnv1a(out.str()));
}

}  // namespace cagm
