// cagm: experiment harness CLI.
//
// Subcommands: run, grid, ablate, suite, plotdata, verify.
// Exit codes: 0 success, 1 configuration error, 2 numeric failure,
// 3 verification failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cagm/config.hpp"
#include "cagm/harness.hpp"
#include "cagm/suite.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitNumericError = 2;
constexpr int kExitVerifyFailure = 3;

cagm::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cagm::ValidationError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return cagm::parse_config_text(buffer.str());
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) seeds.push_back(cagm::parse_u64(item));
    if (seeds.empty()) throw cagm::ValidationError("--seeds: empty seed list");
    return seeds;
}

int cmd_run(const std::string& config_path, const std::string& out,
            const std::string& seeds, const std::string& resume) {
    cagm::ExperimentConfig cfg = load_config(config_path);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    if (!resume.empty()) {
        const cagm::SeedRunResult result = cagm::resume_single_seed(cfg, resume, out);
        if (!result.ok) {
            std::cerr << "numeric failure: " << result.error << "\n";
            return kExitNumericError;
        }
        std::cout << "resumed " << result.run_id << " -> " << result.dir.string() << "\n";
        return kExitOk;
    }
    const cagm::ExperimentResult result = cagm::run_experiment(cfg, out);
    for (const auto& s : result.seeds) {
        std::cout << "seed " << s.seed << ": "
                  << (s.ok ? "final val loss " + cagm::format_double(s.final_record.val_loss)
                           : "FAILED (" + s.error + ")")
                  << "\n";
    }
    std::cout << "summary: " << (out / fs::path("summary.json")).string() << "\n";
    return result.ok ? kExitOk : kExitNumericError;
}

int cmd_grid(const std::string& config_path, const std::string& out, const std::string& seeds) {
    cagm::ExperimentConfig cfg = load_config(config_path);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    const cagm::GridResult result = cagm::grid_search(cfg, out);
    const cagm::GridCell& best = result.cells[result.best_index];
    std::cout << result.cells.size() << " cells -> " << (out / fs::path("grid.csv")).string()
              << "\n";
    std::cout << "best: eta " << cagm::format_double(best.eta) << ", batch " << best.batch_size
              << ", lambda " << cagm::format_double(best.lambda) << " (val loss "
              << cagm::format_double(best.val_loss.mean) << ")\n";
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& out,
               const std::string& seeds) {
    cagm::ExperimentConfig cfg = load_config(config_path);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    const auto rows = cagm::run_ablations(cfg, out);
    bool ok = true;
    for (const auto& row : rows) {
        std::cout << "alignment=" << row.alignment << " curvature=" << row.curvature
                  << " hierarchy=" << row.hierarchy << ": val loss "
                  << cagm::format_double(row.val_loss.mean) << (row.ok ? "" : " [FAILED]")
                  << "\n";
        ok = ok && row.ok;
    }
    std::cout << "table: " << (out / fs::path("ablations.csv")).string() << "\n";
    return ok ? kExitOk : kExitNumericError;
}

int cmd_suite(const std::string& out, const std::string& seeds) {
    std::vector<std::uint64_t> seed_list = {1, 2, 3};
    if (!seeds.empty()) seed_list = parse_seeds(seeds);
    const cagm::SuiteHyperparams hp = cagm::run_report_suite(out, seed_list);
    std::cout << "suite reports in " << out << "\n";
    std::cout << "grid-selected: classify eta " << cagm::format_double(hp.classify_eta)
              << " lambda " << cagm::format_double(hp.classify_lambda) << "; sequence eta "
              << cagm::format_double(hp.sequence_eta) << " lambda "
              << cagm::format_double(hp.sequence_lambda) << "\n";
    return kExitOk;
}

int cmd_plotdata(const std::string& run_dir, const std::string& out) {
    cagm::emit_plotdata(run_dir, out);
    std::cout << "plot series in " << out << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& out, const std::string& seeds) {
    std::vector<std::uint64_t> seed_list = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    if (!seeds.empty()) seed_list = parse_seeds(seeds);
    const cagm::VerifyReport report = cagm::run_verify(out, seed_list);
    for (const auto& check : report.checks)
        std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << ": " << check.detail
                  << "\n";
    for (const auto& s : report.smoke)
        std::cout << "SMOKE noise " << cagm::format_double(s.noise) << ": baseline "
                  << cagm::format_double(s.baseline_accuracy) << ", cagm "
                  << cagm::format_double(s.cagm_accuracy) << " (lambda "
                  << cagm::format_double(s.lambda_selected) << "), gap "
                  << cagm::format_double(s.gap_pp) << "pp, " << s.direction
                  << (s.within_margin ? "" : " [BELOW -0.5pp MARGIN]") << "\n";
    std::cout << "report: " << (out / fs::path("verify-report.json")).string() << "\n";
    if (!report.oracles_ok) return kExitVerifyFailure;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"context-aware gradient mapping experiment harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds, resume_path, run_dir;

    auto* run = app.add_subcommand("run", "run one experiment (all seeds)");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--seeds", seeds, "comma-separated seed list (overrides config)");
    run->add_option("--resume", resume_path, "checkpoint JSON to resume from (single seed)");

    auto* grid = app.add_subcommand("grid", "grid search over grid.* lists");
    grid->add_option("--config", config_path, "config file")->required();
    grid->add_option("--out", out_dir, "output directory")->required();
    grid->add_option("--seeds", seeds, "comma-separated seed list");

    auto* ablate = app.add_subcommand("ablate", "2^3 ablation lattice under shared seeds");
    ablate->add_option("--config", config_path, "config file")->required();
    ablate->add_option("--out", out_dir, "output directory")->required();
    ablate->add_option("--seeds", seeds, "comma-separated seed list");

    auto* suite = app.add_subcommand("suite", "emit the built-in report suite");
    suite->add_option("--out", out_dir, "output directory")->required();
    suite->add_option("--seeds", seeds, "comma-separated seed list (default 1,2,3)");

    auto* plotdata = app.add_subcommand("plotdata", "tidy plot series from a run directory");
    plotdata->add_option("--run", run_dir, "run directory (from `run`)")->required();
    plotdata->add_option("--out", out_dir, "output directory")->required();

    auto* verify = app.add_subcommand("verify", "oracle battery + directional smoke test");
    verify->add_option("--out", out_dir, "output directory")->required();
    verify->add_option("--seeds", seeds, "smoke-test seed list (default 1..10)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, seeds, resume_path);
        if (grid->parsed()) return cmd_grid(config_path, out_dir, seeds);
        if (ablate->parsed()) return cmd_ablate(config_path, out_dir, seeds);
        if (suite->parsed()) return cmd_suite(out_dir, seeds);
        if (plotdata->parsed()) return cmd_plotdata(run_dir, out_dir);
        if (verify->parsed()) return cmd_verify(out_dir, seeds);
    } catch (const cagm::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const cagm::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumericError;
    }
    return kExitConfigError;
}
