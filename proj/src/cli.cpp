#include "bfn/cli.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bfn/experiment.hpp"

namespace bfn {
namespace {

constexpr int kStageError = 1;
constexpr int kUsageError = 2;
constexpr int kBoundFailure = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format;
  std::optional<int> threads;
};

void add_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config, "experiment config file")->required();
  sub->add_option("--seed", flags.seed, "truth seed N (noise seed becomes N+1)");
  sub->add_option("--out-dir", flags.out_dir, "output directory (overrides [outputs] directory)");
  sub->add_option("--format", flags.format, "table format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
}

void print_summary(const ExperimentReport& report, Stage stage, std::ostream& out) {
  for (const auto& w : report.config.warnings) out << "warning: " << w << "\n";
  if (report.info && stage == Stage::kModelInfo) out << format_model_info(*report.info);
  for (const auto& s : report.oracles) {
    out << "oracle " << s.variant.name() << ": cost " << format_double(s.cost_value) << ", residual "
        << format_double(s.residual) << "\n";
  }
  if (report.record) {
    const auto& r = *report.record;
    for (const auto& w : r.warnings) out << "warning: " << w << "\n";
    out << "bfn (" << to_string(report.config.observer.correction.mode) << "): " << r.iterations()
        << " iterations, " << (r.converged ? "converged" : "not converged") << ", target " << r.target.name()
        << "\n";
  }
  if (report.bounds) out << format_bounds_table(*report.bounds);
  if (stage == Stage::kCompare) out << to_csv(comparison_table(report.comparison));
  for (const auto& f : report.files) out << "wrote " << f << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Back-and-forth nudging experiments on the damped wave equation", "bfn_cli"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<Stage, const char*>> stages = {
      {Stage::kModelInfo, "eigenvalues, frequencies, observability constant, output norm"},
      {Stage::kSimulate, "write the true trajectory and the observations"},
      {Stage::kOracle, "solve the variational characterizations"},
      {Stage::kBfn, "run back-and-forth nudging with the configured observer"},
      {Stage::kBounds, "evaluate every error and contraction bound"},
      {Stage::kCompare, "run everything and write the comparison table"},
  };
  std::vector<std::pair<Stage, CLI::App*>> subs;
  for (const auto& [stage, help] : stages) {
    CLI::App* sub = app.add_subcommand(to_string(stage), help);
    add_flags(sub, flags);
    subs.emplace_back(stage, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  Stage stage = Stage::kCompare;
  for (const auto& [s, sub] : subs) {
    if (sub->parsed()) stage = s;
  }

  try {
    ExperimentConfig cfg = parse_config(flags.config);
    if (flags.seed) cfg.override_seed(*flags.seed);
    if (!flags.format.empty()) cfg.outputs.formats = {flags.format};
    if (flags.threads) cfg.threads = *flags.threads;
    if (!flags.out_dir.empty()) cfg.outputs.directory = flags.out_dir;
    validate_config(cfg);
    const ExperimentReport report = run_stage(cfg, stage, cfg.outputs.directory);
    print_summary(report, stage, out);
    if (!report.bounds_hold()) {
      err << "error: a bound check failed\n";
      return kBoundFailure;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kStageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kStageError;
  }
  return 0;
}

}  // namespace bfn
