#pragma once

// Per-step metrics records and their CSV schema.
//
// metrics.csv holds only deterministic quantities: losses, accuracies,
// perplexities, per-term gradient norms, and the counted compute/memory
// estimates. Wall-clock measurements go to a separate timing file so a rerun
// under one seed is byte-identical. Not-applicable cells (e.g. accuracy on a
// regression task, alignment norm in phase 1) are empty.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cagm/error.hpp"
#include "cagm/format.hpp"

namespace cagm {

struct MetricsRecord {
    std::string run_id;
    int phase = 1;
    long long step = 0;
    long long epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<double> val_accuracy;
    std::optional<double> val_perplexity;
    double grad_norm_loss = 0.0;
    std::optional<double> grad_norm_alignment;
    std::optional<double> grad_norm_curvature;
    std::uint64_t flops_estimate = 0;        // counted model-evaluation FLOPs, not measured
    std::uint64_t memory_estimate_bytes = 0;  // static high-water estimate, not measured
    bool failed = false;
};

inline constexpr const char* kMetricsHeader =
    "run_id,phase,step,epoch,train_loss,val_loss,val_accuracy,val_perplexity,"
    "grad_norm_loss,grad_norm_alignment,grad_norm_curvature,flops_estimate,"
    "memory_estimate_bytes,failed";

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string{};
}

}  // namespace detail

inline std::string metrics_csv_row(const MetricsRecord& r) {
    std::ostringstream out;
    out << r.run_id << ',' << r.phase << ',' << r.step << ',' << r.epoch << ','
        << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
        << detail::opt_cell(r.val_accuracy) << ',' << detail::opt_cell(r.val_perplexity) << ','
        << format_double(r.grad_norm_loss) << ',' << detail::opt_cell(r.grad_norm_alignment)
        << ',' << detail::opt_cell(r.grad_norm_curvature) << ',' << r.flops_estimate << ','
        << r.memory_estimate_bytes << ',' << (r.failed ? 1 : 0);
    return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline MetricsRecord metrics_from_csv_row(const std::string& line) {
    const auto cells = split_csv_line(line);
    if (cells.size() != 14)
        throw ValidationError("metrics row: expected 14 cells, got " +
                              std::to_string(cells.size()) + " in '" + line + "'");
    MetricsRecord r;
    r.run_id = cells[0];
    r.phase = static_cast<int>(parse_int(cells[1]));
    r.step = parse_int(cells[2]);
    r.epoch = parse_int(cells[3]);
    r.train_loss = parse_double(cells[4]);
    r.val_loss = parse_double(cells[5]);
    if (!cells[6].empty()) r.val_accuracy = parse_double(cells[6]);
    if (!cells[7].empty()) r.val_perplexity = parse_double(cells[7]);
    r.grad_norm_loss = parse_double(cells[8]);
    if (!cells[9].empty()) r.grad_norm_alignment = parse_double(cells[9]);
    if (!cells[10].empty()) r.grad_norm_curvature = parse_double(cells[10]);
    r.flops_estimate = static_cast<std::uint64_t>(parse_int(cells[11]));
    r.memory_estimate_bytes = static_cast<std::uint64_t>(parse_int(cells[12]));
    r.failed = parse_int(cells[13]) != 0;
    return r;
}

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single value
    std::size_t count = 0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.count = values.size();
    if (values.empty()) return a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return a;
}

}  // namespace cagm
