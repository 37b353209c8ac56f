#include "bfn/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <random>

namespace bfn {
namespace {

constexpr std::uint64_t kInputNoiseStream = 0x9E3779B97F4A7C15ULL;

const CorrectionMode kAllCorrections[] = {CorrectionMode::kIdentity, CorrectionMode::kExact,
                                          CorrectionMode::kScalarDecay};

template <typename Fn>
auto staged(Stage stage, std::vector<StageTiming>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = fn();
    timings.push_back({to_string(stage),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    return result;
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + to_string(stage) + "': " + e.message());
  }
}

std::optional<double> finite(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

const VariationalSolution* find_variant(const std::vector<VariationalSolution>& sols, const Variant& v) {
  for (const auto& s : sols) {
    if (s.variant.kind == v.kind && s.variant.kappa == v.kappa) return &s;
  }
  return nullptr;
}

Json record_summary(const BfnRunRecord& record) {
  Json j;
  j["target_variant"] = record.target.name();
  j["iterations"] = record.iterations();
  j["converged"] = record.converged;
  j["final_error_to_truth"] =
      record.errors_to_reference ? Json(record.errors_to_reference->back()) : Json(nullptr);
  j["final_cost_J"] = record.costs.back();
  j["final_char_residual"] = record.char_residuals.back();
  j["warnings"] = record.warnings;
  j["estimate"] = to_json(record.estimate());
  return j;
}

class Writer {
 public:
  Writer(const std::string& dir, const ExperimentConfig& cfg, std::vector<std::string>& files)
      : dir_(dir), cfg_(cfg), files_(files) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) raise(ErrorKind::kIoError, "cannot create output directory " + dir + ": " + ec.message());
  }

  void table(const std::string& stem, const CsvTable& t) {
    if (cfg_.outputs.wants("csv")) write_csv(path(stem + ".csv"), t);
    if (cfg_.outputs.wants("json")) {
      Json rows = Json::array();
      for (const auto& r : t.rows) {
        Json row;
        for (std::size_t k = 0; k < t.header.size(); ++k) {
          if (t.header[k] == "variant") {
            row[t.header[k]] = r[k];
            continue;
          }
          const double v = parse_double_field(r[k]);
          row[t.header[k]] = std::isnan(v) ? Json(nullptr) : Json(v);
        }
        rows.push_back(row);
      }
      write_json(path(stem + ".json"), rows);
    }
  }

  void json(const std::string& name, const Json& doc) { write_json(path(name), doc); }
  void text(const std::string& name, const std::string& body) { write_text_file(path(name), body); }

 private:
  std::string path(const std::string& name) {
    const std::string p = (std::filesystem::path(dir_) / name).string();
    files_.push_back(p);
    return p;
  }

  std::string dir_;
  const ExperimentConfig& cfg_;
  std::vector<std::string>& files_;
};

}  // namespace

Eigen::VectorXd truth_state(const ExperimentConfig& cfg, const SystemDesc<double>& sys) {
  const int n = cfg.model.n_modes;
  ModalState<double> modal;
  if (cfg.truth.modal) {
    modal = *cfg.truth.modal;
  } else {
    std::mt19937_64 rng(cfg.truth.seed);
    std::normal_distribution<double> normal;
    modal.alphas.resize(n);
    modal.betas.resize(n);
    for (int j = 0; j < n; ++j) modal.alphas(j) = normal(rng);
    for (int j = 0; j < n; ++j) modal.betas(j) = normal(rng);
  }
  Eigen::VectorXd x = to_state(modal);
  const double norm = weighted_norm<double>(sys, x);
  if (!(norm > 0.0)) return x;
  return x / norm;
}

Scenario build_scenario(const ExperimentConfig& cfg) {
  WaveModalModel<double> model = build_wave_model<double>(cfg.model.n_modes, cfg.model.epsilon);
  SystemDesc<double> sys = build_observation(model, cfg.observation_spec());
  const TimeGrid grid = cfg.grid();
  Eigen::VectorXd truth = truth_state(cfg, sys);
  std::optional<InputNoise> input_noise;
  if (cfg.noise.input_sigma > 0.0) input_noise = InputNoise{cfg.noise.input_sigma, cfg.noise.seed ^ kInputNoiseStream};
  Trajectory traj = simulate_trajectory(sys, truth, cfg.load, grid, input_noise);
  ObservationSeries y = synthesize_observations(traj, sys, cfg.noise.sigma, cfg.noise.seed);
  return {std::move(model), std::move(sys), grid, std::move(truth), cfg.load, std::move(traj), std::move(y)};
}

ModelInfo model_info(const Scenario& sc) {
  ModelInfo info;
  info.lambdas = sc.model.lambdas;
  info.omegas = sc.model.omegas;
  info.delta = observability_delta(sc.sys, assemble_gramian(sc.sys, sc.grid, Loop::open()));
  info.c_norm = observation_norm(sc.sys);
  info.dissipation_condition = thm2_condition(sc.sys, info.delta, sc.grid.t_final());
  return info;
}

std::string format_model_info(const ModelInfo& info) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%4s %22s %22s\n", "j", "lambda_j", "omega_j");
  out += line;
  for (Eigen::Index j = 0; j < info.lambdas.size(); ++j) {
    std::snprintf(line, sizeof line, "%4ld %22.17g %22.17g\n", static_cast<long>(j + 1), info.lambdas(j),
                  info.omegas(j));
    out += line;
  }
  std::snprintf(line, sizeof line, "delta                  %.17g\n", info.delta);
  out += line;
  std::snprintf(line, sizeof line, "c_norm                 %.17g\n", info.c_norm);
  out += line;
  std::snprintf(line, sizeof line, "dissipation_condition  %.17g\n", info.dissipation_condition);
  out += line;
  return out;
}

Json to_json(const ModelInfo& info) {
  Json j;
  j["lambdas"] = to_json(info.lambdas);
  j["omegas"] = to_json(info.omegas);
  j["delta"] = info.delta;
  j["c_norm"] = info.c_norm;
  j["dissipation_condition"] = info.dissipation_condition;
  return j;
}

std::vector<VariationalSolution> oracle_solutions(const Scenario& sc, const ExperimentConfig& cfg) {
  std::vector<Variant> variants{Variant::open_loop()};
  if (!check_esad(sc.sys).is_skew) {
    variants.push_back(Variant::bias());
    variants.push_back(Variant::scalar_corrected());
  }
  if (cfg.observer.schedule.kind == GainSchedule::Kind::kConstant) {
    variants.push_back(Variant::closed_loop(cfg.observer.schedule.kappa));
  }
  std::vector<VariationalSolution> out;
  for (const auto& v : variants) out.push_back(variational_minimizer(sc.sys, sc.y, sc.load, sc.grid, v));
  return out;
}

BfnRunRecord run_bfn(const Scenario& sc, const ExperimentConfig& cfg, CorrectionMode mode) {
  BfnOptions options;
  options.max_iter = cfg.observer.max_iter;
  options.tol = cfg.observer.tol;
  options.reference = sc.truth;
  return bfn_run(sc.sys, sc.y, sc.load, cfg.observer.schedule, CorrectionSpec{mode}, sc.grid, options);
}

BoundsReport run_bounds(const Scenario& sc, const ExperimentConfig& cfg) {
  BoundsInputs inputs;
  inputs.schedule = cfg.observer.schedule;
  inputs.correction = cfg.observer.correction;
  inputs.max_iter = cfg.observer.max_iter;
  inputs.tol = cfg.observer.tol;
  inputs.threads = cfg.threads;
  return evaluate_bounds(sc.model, sc.sys, sc.y, sc.load, sc.grid, inputs);
}

CsvTable comparison_table(const std::vector<ComparisonRow>& rows) {
  CsvTable table;
  table.header = {"variant", "final_error_to_oracle", "cost_J", "char_residual", "bound", "actual"};
  for (const auto& r : rows) {
    table.add_row({r.variant, format_double(r.final_error_to_oracle), format_double(r.cost_J),
                   format_double(r.char_residual), format_double(r.bound), format_double(r.actual)});
  }
  return table;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kModelInfo: return "model-info";
    case Stage::kSimulate: return "simulate";
    case Stage::kOracle: return "oracle";
    case Stage::kBfn: return "bfn";
    case Stage::kBounds: return "bounds";
    case Stage::kCompare: return "compare";
  }
  return "unknown";
}

ExperimentReport run_stage(const ExperimentConfig& cfg, Stage stage, const std::string& out_dir) {
  ExperimentReport report;
  report.config = cfg;
  auto& timings = report.timings;
  Writer out(out_dir, cfg, report.files);
  const bool all = stage == Stage::kCompare;

  const Scenario sc = staged(Stage::kSimulate, timings, [&] { return build_scenario(cfg); });

  if (stage == Stage::kModelInfo || all) {
    report.info = staged(Stage::kModelInfo, timings, [&] { return model_info(sc); });
    out.json("model_info.json", to_json(*report.info));
  }
  if (stage == Stage::kSimulate || all) {
    out.table("trajectory", trajectory_table(sc.trajectory));
    out.table("observations", observation_table(sc.y));
  }
  if (stage == Stage::kOracle || all) {
    report.oracles = staged(Stage::kOracle, timings, [&] { return oracle_solutions(sc, cfg); });
    Json doc = Json::array();
    for (const auto& s : report.oracles) doc.push_back(to_json(s));
    out.json("oracle.json", doc);
  }
  if (stage == Stage::kBfn || all) {
    const CorrectionMode configured = cfg.observer.correction.mode;
    if (!all) {
      report.record = staged(Stage::kBfn, timings, [&] { return run_bfn(sc, cfg, configured); });
    } else {
      // Independent variants; results do not depend on whether they overlap.
      auto records = staged(Stage::kBfn, timings, [&] {
        std::vector<BfnRunRecord> recs;
        if (cfg.threads > 1) {
          std::vector<std::future<BfnRunRecord>> jobs;
          for (CorrectionMode m : kAllCorrections) {
            jobs.push_back(std::async(std::launch::async, [&sc, &cfg, m] { return run_bfn(sc, cfg, m); }));
          }
          for (auto& j : jobs) recs.push_back(j.get());
        } else {
          for (CorrectionMode m : kAllCorrections) recs.push_back(run_bfn(sc, cfg, m));
        }
        return recs;
      });
      for (std::size_t k = 0; k < records.size(); ++k) {
        if (kAllCorrections[k] == configured) report.record = records[k];
        report.variant_records.emplace_back(to_string(kAllCorrections[k]), std::move(records[k]));
      }
    }
    out.table("bfn_record", record_table(*report.record));
    out.json("bfn_estimate.json", to_json(*report.record));
  }
  if (stage == Stage::kBounds || all) {
    report.bounds = staged(Stage::kBounds, timings, [&] { return run_bounds(sc, cfg); });
    out.json("bounds.json", to_json(*report.bounds));
    out.text("bounds.txt", format_bounds_table(*report.bounds));
  }
  if (all) {
    auto& rows = report.comparison;
    for (const auto& s : report.oracles) {
      rows.push_back({"oracle_" + s.variant.name(), std::nullopt, s.cost_value, s.residual, std::nullopt, std::nullopt});
    }
    for (const auto& [name, rec] : report.variant_records) {
      const VariationalSolution* target = find_variant(report.oracles, rec.target);
      std::optional<VariationalSolution> extra;
      if (target == nullptr) {
        extra = variational_minimizer(sc.sys, sc.y, sc.load, sc.grid, rec.target);
        target = &*extra;
      }
      const double scale = std::max(weighted_norm<double>(sc.sys, target->x_opt), 1e-300);
      rows.push_back({"bfn_" + name, weighted_norm<double>(sc.sys, rec.estimate() - target->x_opt) / scale,
                      rec.costs.back(), rec.char_residuals.back(), std::nullopt, std::nullopt});
    }
    for (const auto& c : report.bounds->checks) {
      rows.push_back({"check_" + c.name, std::nullopt, std::nullopt, std::nullopt, finite(c.bound), finite(c.actual)});
    }
    out.table("comparison", comparison_table(rows));

    Json doc;
    doc["config"] = to_json(cfg);
    doc["model_info"] = to_json(*report.info);
    Json oracles = Json::array();
    for (const auto& s : report.oracles) oracles.push_back(to_json(s));
    doc["oracles"] = oracles;
    Json runs;
    for (const auto& [name, rec] : report.variant_records) runs[name] = record_summary(rec);
    doc["bfn"] = runs;
    doc["bounds"] = to_json(*report.bounds);
    out.json("report.json", doc);
  }

  std::string timing_text;
  char line[96];
  for (const auto& t : report.timings) {
    std::snprintf(line, sizeof line, "%-12s %.6f s\n", t.stage.c_str(), t.seconds);
    timing_text += line;
  }
  out.text("timings.txt", timing_text);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return run_stage(cfg, Stage::kCompare, cfg.outputs.directory);
}

}  // namespace bfn
