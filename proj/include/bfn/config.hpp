#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bfn/model.hpp"
#include "bfn/nudge.hpp"
#include "bfn/propagate.hpp"

namespace bfn {

struct ExperimentConfig {
  struct Model {
    int n_modes{0};
    double epsilon{0};
  } model;
  struct Observation {
    double a{0};
    double b{std::numbers::pi / 2};
    int m{0};  // 0 until resolved to n_modes
    ObservedField field{ObservedField::kVelocity};
  } observation;
  struct Time {
    double t_final{0};
    int n_steps{0};
  } time;
  struct Truth {
    std::uint64_t seed{1};
    std::optional<ModalState<double>> modal;  // explicit coefficients win over the seed
  } truth;
  struct Noise {
    double sigma{0};
    std::uint64_t seed{2};
    double input_sigma{0};
  } noise;
  LoadSpec load;
  struct Observer {
    GainSchedule schedule;
    CorrectionSpec correction;
    int max_iter{100};
    double tol{1e-8};
  } observer;
  struct Outputs {
    std::string directory{"bfn_out"};
    std::vector<std::string> formats{"csv"};
    bool wants(const std::string& format) const;
  } outputs;
  int threads{1};

  std::vector<std::string> warnings;

  TimeGrid grid() const { return TimeGrid(time.t_final, time.n_steps); }
  ObservationSpec<double> observation_spec() const;
  /// Truth seed N and noise seed N + 1.
  void override_seed(std::uint64_t seed);
};

/// Parses "key = value" lines grouped under [section] headers.  '#' and ';'
/// start comments.  Numbers accept the forms 1.5, pi, pi/2, 3*pi/4.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<string>");
ExperimentConfig parse_config(const std::string& path);

/// Re-checks every invariant; parse_config already calls this.
void validate_config(ExperimentConfig& cfg);

/// Serializes back to the text format.  Parsing the result reproduces cfg.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace bfn
