#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bfn/bounds.hpp"
#include "bfn/config.hpp"
#include "bfn/io.hpp"
#include "bfn/nudge.hpp"
#include "bfn/varopt.hpp"

namespace bfn {

/// Everything a run derives from the config before any estimation.
struct Scenario {
  WaveModalModel<double> model;
  SystemDesc<double> sys;
  TimeGrid grid;
  Eigen::VectorXd truth;
  LoadSpec load;
  Trajectory trajectory;
  ObservationSeries y;
};

/// Gaussian modal coefficients from the truth seed (or the explicit ones),
/// scaled to unit W-norm.
Eigen::VectorXd truth_state(const ExperimentConfig& cfg, const SystemDesc<double>& sys);
Scenario build_scenario(const ExperimentConfig& cfg);

struct ModelInfo {
  Eigen::VectorXd lambdas;
  Eigen::VectorXd omegas;
  double delta{0};
  double c_norm{0};
  double dissipation_condition{0};
};

ModelInfo model_info(const Scenario& sc);
std::string format_model_info(const ModelInfo& info);
Json to_json(const ModelInfo& info);

/// open_loop always; bias and scalar_corrected for dissipative models;
/// closed_loop(kappa) for a constant schedule.
std::vector<VariationalSolution> oracle_solutions(const Scenario& sc, const ExperimentConfig& cfg);

/// BFN with the configured schedule; errors are measured against the truth.
BfnRunRecord run_bfn(const Scenario& sc, const ExperimentConfig& cfg, CorrectionMode mode);

BoundsReport run_bounds(const Scenario& sc, const ExperimentConfig& cfg);

struct ComparisonRow {
  std::string variant;
  std::optional<double> final_error_to_oracle;
  std::optional<double> cost_J;
  std::optional<double> char_residual;
  std::optional<double> bound;
  std::optional<double> actual;
};

/// Columns variant, final_error_to_oracle, cost_J, char_residual, bound, actual.
CsvTable comparison_table(const std::vector<ComparisonRow>& rows);

enum class Stage { kModelInfo, kSimulate, kOracle, kBfn, kBounds, kCompare };

std::string to_string(Stage stage);

struct StageTiming {
  std::string stage;
  double seconds{0};
};

struct ExperimentReport {
  ExperimentConfig config;
  std::optional<ModelInfo> info;
  std::vector<VariationalSolution> oracles;
  std::optional<BfnRunRecord> record;  // configured correction
  std::vector<std::pair<std::string, BfnRunRecord>> variant_records;
  std::optional<BoundsReport> bounds;
  std::vector<ComparisonRow> comparison;
  std::vector<StageTiming> timings;
  std::vector<std::string> files;

  /// False iff a bounds stage ran and one of its applicable checks failed.
  bool bounds_hold() const { return !bounds || bounds->all_hold(); }
};

/// Runs one stage (compare runs all of them) and writes its files into
/// out_dir, which is created if needed.  Stage failures are rethrown with
/// the stage named.
ExperimentReport run_stage(const ExperimentConfig& cfg, Stage stage, const std::string& out_dir);

/// Full pipeline into cfg.outputs.directory.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace bfn
