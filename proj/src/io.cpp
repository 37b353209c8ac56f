#include "bfn/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace bfn {
namespace {

std::string indexed(const char* prefix, Eigen::Index i) { return prefix + std::to_string(i); }

bool needs_quotes(const std::string& field) {
  return field.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quote(const std::string& field) {
  if (!needs_quotes(field)) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) raise(ErrorKind::kDimensionMismatch, "CSV row width differs from header");
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  raise(ErrorKind::kParseError, "CSV has no column '" + name + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double parse_double_field(const std::string& field) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) raise(ErrorKind::kParseError, "not a number: '" + field + "'");
  return v;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote(fields[i]);
    }
    out += "\r\n";
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) raise(ErrorKind::kParseError, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) raise(ErrorKind::kParseError, "CSV has no header");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      raise(ErrorKind::kParseError, "CSV row " + std::to_string(r + 1) + " has the wrong number of fields");
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIoError, "cannot write " + path);
  out << contents;
  if (!out) raise(ErrorKind::kIoError, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIoError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_csv(const std::string& path, const CsvTable& table) { write_text_file(path, to_csv(table)); }

CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path)); }

void write_json(const std::string& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::kParseError, path + ": " + e.what());
  }
}

CsvTable trajectory_table(const Trajectory& traj) {
  CsvTable table;
  table.header.push_back("t");
  for (Eigen::Index k = 0; k < traj.states.rows(); ++k) table.header.push_back(indexed("z", k));
  for (Eigen::Index i = 0; i < traj.states.cols(); ++i) {
    std::vector<std::string> row{format_double(traj.grid.time(i))};
    for (Eigen::Index k = 0; k < traj.states.rows(); ++k) row.push_back(format_double(traj.states(k, i)));
    table.add_row(std::move(row));
  }
  return table;
}

CsvTable observation_table(const ObservationSeries& y) {
  CsvTable table;
  table.header.push_back("t");
  for (Eigen::Index k = 0; k < y.samples.rows(); ++k) table.header.push_back(indexed("y", k));
  for (Eigen::Index i = 0; i < y.samples.cols(); ++i) {
    std::vector<std::string> row{format_double(y.grid.time(i))};
    for (Eigen::Index k = 0; k < y.samples.rows(); ++k) row.push_back(format_double(y.samples(k, i)));
    table.add_row(std::move(row));
  }
  return table;
}

ObservationSeries observations_from_table(const CsvTable& table) {
  if (table.header.empty() || table.header[0] != "t") raise(ErrorKind::kParseError, "observation CSV must start with t");
  const auto nodes = static_cast<Eigen::Index>(table.rows.size());
  if (nodes < 3) raise(ErrorKind::kParseError, "observation CSV needs at least 3 samples");
  const double t_final = parse_double_field(table.rows.back()[0]);
  ObservationSeries y{TimeGrid(t_final, static_cast<int>(nodes - 1)),
                      Eigen::MatrixXd(static_cast<Eigen::Index>(table.header.size()) - 1, nodes), std::nullopt, 0.0};
  for (Eigen::Index i = 0; i < nodes; ++i) {
    for (Eigen::Index k = 0; k < y.samples.rows(); ++k) y.samples(k, i) = parse_double_field(table.rows[i][k + 1]);
  }
  return y;
}

CsvTable record_table(const BfnRunRecord& record) {
  CsvTable table;
  table.header = {"iter", "kappa", "err_to_reference", "cost_J", "char_residual"};
  for (int j = 0; j < record.iterations(); ++j) {
    std::optional<double> err;
    if (record.errors_to_reference) err = (*record.errors_to_reference)[j];
    table.add_row({std::to_string(j + 1), format_double(record.gains_used[j]), format_double(err),
                   format_double(record.costs[j]), format_double(record.char_residuals[j])});
  }
  return table;
}

Json to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) raise(ErrorKind::kParseError, "expected a JSON array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json to_json(const VariationalSolution& sol) {
  Json j;
  j["variant"] = sol.variant.name();
  j["kappa"] = sol.variant.kind == Variant::Kind::kClosedLoop ? Json(sol.variant.kappa) : Json(nullptr);
  j["delta"] = nullable(sol.delta);
  j["cost_value"] = sol.cost_value;
  j["residual"] = sol.residual;
  j["x_opt"] = to_json(sol.x_opt);
  return j;
}

VariationalSolution solution_from_json(const Json& j) {
  VariationalSolution sol;
  try {
    const std::string name = j.at("variant").get<std::string>();
    if (name == "open_loop") sol.variant = Variant::open_loop();
    else if (name == "closed_loop") sol.variant = Variant::closed_loop(j.at("kappa").get<double>());
    else if (name == "bias") sol.variant = Variant::bias();
    else if (name == "scalar_corrected") sol.variant = Variant::scalar_corrected();
    else raise(ErrorKind::kParseError, "unknown variant '" + name + "'");
    sol.delta = j.at("delta").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("delta").get<double>();
    sol.cost_value = j.at("cost_value").get<double>();
    sol.residual = j.at("residual").get<double>();
    sol.x_opt = vector_from_json(j.at("x_opt"));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kParseError, std::string("malformed solution: ") + e.what());
  }
  return sol;
}

Json to_json(const BfnRunRecord& record) {
  Json j;
  j["target_variant"] = record.target.name();
  j["iterations"] = record.iterations();
  j["converged"] = record.converged;
  j["warnings"] = record.warnings;
  j["estimate"] = record.iterates.empty() ? Json::array() : to_json(record.estimate());
  Json rows = Json::array();
  for (int k = 0; k < record.iterations(); ++k) {
    Json row;
    row["iter"] = k + 1;
    row["kappa"] = record.gains_used[k];
    row["err_to_reference"] = record.errors_to_reference ? Json((*record.errors_to_reference)[k]) : Json(nullptr);
    row["cost_J"] = record.costs[k];
    row["char_residual"] = record.char_residuals[k];
    rows.push_back(row);
  }
  j["history"] = rows;
  return j;
}

Json to_json(const BoundsReport& r) {
  Json j;
  j["delta"] = r.delta;
  j["c_norm"] = r.c_norm;
  j["alpha"] = r.alpha;
  j["alpha_scalar"] = r.alpha_scalar;
  j["dissipation_condition"] = r.thm2_condition_value;
  j["contraction_kappa"] = r.contraction_kappa;
  j["contraction_measured"] = r.contraction_measured;
  j["contraction_bound"] = r.contraction_bound;
  j["gap_bound_max_violation"] = r.frob_bound_max_violation;
  j["a_posteriori_bound"] = nullable(r.thm4_bound);
  j["a_posteriori_actual"] = nullable(r.thm4_actual);
  j["a_priori_bound"] = nullable(r.thm5_bound);
  j["a_priori_actual"] = nullable(r.thm5_actual);
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    Json e;
    e["name"] = c.name;
    e["applicable"] = c.applicable;
    e["holds"] = c.holds;
    e["actual"] = nullable(c.actual);
    e["bound"] = nullable(c.bound);
    checks.push_back(e);
  }
  j["checks"] = checks;
  j["all_hold"] = r.all_hold();
  return j;
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["model"] = {{"n_modes", cfg.model.n_modes}, {"epsilon", cfg.model.epsilon}};
  j["observation"] = {{"a", cfg.observation.a},
                      {"b", cfg.observation.b},
                      {"m", cfg.observation.m},
                      {"field", cfg.observation.field == ObservedField::kVelocity ? "velocity" : "displacement"}};
  j["time"] = {{"t_final", cfg.time.t_final}, {"n_steps", cfg.time.n_steps}};
  Json truth;
  truth["seed"] = cfg.truth.seed;
  if (cfg.truth.modal) {
    truth["alphas"] = to_json(Eigen::VectorXd(cfg.truth.modal->alphas));
    truth["betas"] = to_json(Eigen::VectorXd(cfg.truth.modal->betas));
  }
  j["truth"] = truth;
  j["noise"] = {{"sigma", cfg.noise.sigma}, {"seed", cfg.noise.seed}, {"input_sigma", cfg.noise.input_sigma}};
  j["load"] = {{"kind", cfg.load.kind == LoadSpec::Kind::kZero ? "zero" : "modal_sinusoid"},
               {"mode", cfg.load.mode},
               {"amplitude", cfg.load.amplitude},
               {"frequency", cfg.load.frequency}};
  Json observer;
  observer["schedule"] = cfg.observer.schedule.name();
  observer["kappa"] = cfg.observer.schedule.kappa;
  if (cfg.observer.schedule.kind == GainSchedule::Kind::kCustom) observer["gains"] = cfg.observer.schedule.sequence;
  observer["square_summable"] = cfg.observer.schedule.square_summable();
  observer["correction"] = to_string(cfg.observer.correction.mode);
  observer["max_iter"] = cfg.observer.max_iter;
  observer["tol"] = cfg.observer.tol;
  j["observer"] = observer;
  // Directory and thread count are left out so reports compare equal across runs.
  j["outputs"] = {{"formats", cfg.outputs.formats}};
  j["warnings"] = cfg.warnings;
  return j;
}

}  // namespace bfn
