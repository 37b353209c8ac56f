#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfn/bounds.hpp"
#include "bfn/config.hpp"
#include "bfn/nudge.hpp"
#include "bfn/propagate.hpp"
#include "bfn/varopt.hpp"

namespace bfn {

using Json = nlohmann::ordered_json;

/// Header plus rows of already formatted fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  /// Column index by name; throws ParseError when absent.
  std::size_t column(const std::string& name) const;
};

/// 17 significant digits; NaN and absent values become an empty field.
std::string format_double(double v);
std::string format_double(const std::optional<double>& v);
/// Inverse of format_double; an empty field reads as NaN.
double parse_double_field(const std::string& field);

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);
void write_json(const std::string& path, const Json& doc);
Json read_json(const std::string& path);

/// Columns t, z0..z{dim-1}.
CsvTable trajectory_table(const Trajectory& traj);
/// Columns t, y0..y{m-1}.
CsvTable observation_table(const ObservationSeries& y);
ObservationSeries observations_from_table(const CsvTable& table);
/// Columns iter, kappa, err_to_reference, cost_J, char_residual.
CsvTable record_table(const BfnRunRecord& record);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const VariationalSolution& sol);
Json to_json(const BfnRunRecord& record);
Json to_json(const BoundsReport& report);
Json to_json(const ExperimentConfig& cfg);

Eigen::VectorXd vector_from_json(const Json& j);
/// Reads back what to_json(VariationalSolution) wrote (no Gramian or chi).
VariationalSolution solution_from_json(const Json& j);

}  // namespace bfn
