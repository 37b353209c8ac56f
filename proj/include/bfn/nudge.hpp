#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfn/model.hpp"
#include "bfn/propagate.hpp"
#include "bfn/varopt.hpp"

namespace bfn {

/// Observer gains kappa_j, j = 1, 2, ...
struct GainSchedule {
  enum class Kind { kConstant, kHarmonic, kCustom };
  Kind kind{Kind::kHarmonic};
  double kappa{0.5};
  /// Custom gains; the last entry is held for j beyond the sequence.
  std::vector<double> sequence;

  static GainSchedule constant(double kappa);
  static GainSchedule harmonic(double kappa);
  static GainSchedule custom(std::vector<double> gains);

  bool diverges_sum() const { return true; }
  bool square_summable() const { return kind == Kind::kHarmonic; }
  std::string name() const;
};

double gain(const GainSchedule& schedule, int j);

struct CorrectionSpec {
  CorrectionMode mode{CorrectionMode::kIdentity};
};

std::string to_string(CorrectionMode mode);

/// Forward and backward observers for one (system, correction, data) set with
/// the feedback operators precomputed on the grid.  Without data the sweeps
/// are homogeneous (y = 0, f = 0), which realizes U^+(T) and U^-(T).
class ObserverSweeps {
 public:
  ObserverSweeps(const SystemDesc<double>& sys, const CorrectionSpec& corr, const TimeGrid& grid,
                 const ObservationSeries* y, const LoadSpec& load);

  /// z' = A z + f(t) + kappa K(t) C*(y(t) - C z) on [0, T].
  Eigen::VectorXd forward(const Eigen::VectorXd& z_init, double kappa) const;
  /// z' = -A z - f(T-t) + kappa K(T-t) C*(y(T-t) - C z) on [0, T].
  Eigen::VectorXd backward(const Eigen::VectorXd& z_init, double kappa) const;

 private:
  template <bool Backward>
  Eigen::VectorXd sweep(const Eigen::VectorXd& z_init, double kappa) const;

  TimeGrid grid_;
  ExponentialTrapezoid forward_step_;
  ExponentialTrapezoid backward_step_;
  Eigen::MatrixXd ctc_;                // C* C
  std::vector<double> k_scalar_;       // K_i = k_i I (identity and scalar modes)
  std::vector<Eigen::MatrixXd> k_ctc_; // K_i C* C (exact mode)
  Eigen::MatrixXd data_;               // K_i C* y_i, one column per node
  Eigen::MatrixXd load_;               // f(t_i), one column per node
  bool has_load_{false};
};

Eigen::VectorXd forward_sweep(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                              double kappa, const CorrectionSpec& corr, const TimeGrid& grid,
                              const Eigen::VectorXd& z_init);

/// Returns z^-(T), the estimate of z(0).
Eigen::VectorXd backward_sweep(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                               double kappa, const CorrectionSpec& corr, const TimeGrid& grid,
                               const Eigen::VectorXd& z_init);

struct BfnOptions {
  int max_iter{100};
  double tol{1e-8};
  std::optional<Eigen::VectorXd> reference;
  /// z_1^+(0); zero when absent.
  std::optional<Eigen::VectorXd> initial;
};

struct BfnRunRecord {
  std::vector<Eigen::VectorXd> iterates;
  std::optional<std::vector<double>> errors_to_reference;
  std::vector<double> costs;
  std::vector<double> char_residuals;
  std::vector<double> gains_used;
  Variant target;
  bool converged{false};
  std::vector<std::string> warnings;

  int iterations() const { return static_cast<int>(iterates.size()); }
  const Eigen::VectorXd& estimate() const { return iterates.back(); }
};

/// The oracle variant a BFN run converges to.
Variant matched_variant(const SystemDesc<double>& sys, const GainSchedule& schedule, const CorrectionSpec& corr);

BfnRunRecord bfn_run(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                     const GainSchedule& schedule, const CorrectionSpec& corr, const TimeGrid& grid,
                     const BfnOptions& options);

}  // namespace bfn
