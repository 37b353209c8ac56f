#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfn/model.hpp"
#include "bfn/nudge.hpp"
#include "bfn/propagate.hpp"

namespace bfn {

/// (e^{qT} - 1)/q - T, with the q -> 0 limit 0.
double dissipation_growth(double q_half_norm, double t_final);

/// Contraction rate alpha of one back-and-forth pass:
///   2 k0 delta - 2 ||C||^2 (2 k1 growth + int_0^T e^{qs} ||K(s) - k(s) I|| ds).
/// Negative values are returned as-is.
double lemma1_alpha(const SystemDesc<double>& sys, const CorrectionSpec& corr, const TimeGrid& grid, double delta);

/// e^{-qT} delta - 3 ||C||^2 growth; positive means the exact correction is admissible.
double thm2_condition(const SystemDesc<double>& sys, double delta, double t_final);

/// ||U^-(T) U^+(T)||_W of the homogeneous back-and-forth map, built column by
/// column.  Columns are split over `threads` workers; the result does not
/// depend on the split.
double measure_contraction(const SystemDesc<double>& sys, double kappa, const CorrectionSpec& corr,
                           const TimeGrid& grid, int threads = 1);

enum class SweepDirection { kForward, kBackward };

/// ||e^{(+-A - kappa C*C) T}||_W for one uncorrected direction.
double measure_one_way(const SystemDesc<double>& sys, double kappa, const TimeGrid& grid, SweepDirection direction);

/// eps e^{-eps t} 2 sqrt(lambda1) / (lambda1 - eps^2/4).
double frob_gap_bound(double epsilon, double lambda1, double t);

struct FrobGapSample {
  double t{0};
  double gap{0};
  double bound{0};
};

struct FrobGapResult {
  double max_violation{0};
  std::vector<FrobGapSample> samples;
};

/// Measured ||P(t) - e^{-eps t} I||_W against frob_gap_bound at every grid node.
FrobGapResult frob_gap_check(const WaveModalModel<double>& model, const TimeGrid& grid);

/// A posteriori bound on ||x_opt - x_scalar||.
double thm4_bound(double epsilon, double c_norm, double t_final, double delta, double lambda1, double chi_tilde_norm);

/// A priori bound on ||x_opt - lim BFN_scalar||.  Throws AlphaNonpositive for alpha <= 0.
double thm5_bound(double epsilon, double c_norm, double t_final, double alpha, double lambda1, double chi_norm);

struct BoundCheck {
  std::string name;
  bool applicable{false};
  bool holds{true};
  double actual{0};
  double bound{0};
};

struct BoundsReport {
  double delta{0};
  double c_norm{0};
  double alpha{0};         // for the configured correction
  double alpha_scalar{0};  // for the scalar discount e^{-eps t}
  double contraction_kappa{0};
  double contraction_measured{0};
  double contraction_bound{0};
  double thm2_condition_value{0};
  double frob_bound_max_violation{0};
  double thm4_bound{0};
  double thm4_actual{0};
  double thm5_bound{0};
  double thm5_actual{0};
  std::vector<BoundCheck> checks;

  bool all_hold() const;
};

struct BoundsInputs {
  GainSchedule schedule;
  CorrectionSpec correction;
  int max_iter{100};
  double tol{1e-8};
  int threads{1};
  /// Gain at which the contraction estimate is probed.
  double contraction_kappa{1e-2};
};

/// Evaluates every bound for one scenario and records which ones hold.
BoundsReport evaluate_bounds(const WaveModalModel<double>& model, const SystemDesc<double>& sys,
                             const ObservationSeries& y, const LoadSpec& load, const TimeGrid& grid,
                             const BoundsInputs& inputs);

/// Human-readable table.
std::string format_bounds_table(const BoundsReport& report);

}  // namespace bfn
