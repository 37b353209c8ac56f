#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfn/model.hpp"
#include "bfn/propagate.hpp"

namespace bfn {

/// Dynamics defining z[x]: free (z' = Az + f) or with colocated feedback
/// (z' = Az + f + kappa C*(y - Cz)).
struct Loop {
  enum class Kind { kOpen, kClosed };
  Kind kind{Kind::kOpen};
  double kappa{0};

  static Loop open() { return {}; }
  static Loop closed(double kappa) { return {Kind::kClosed, kappa}; }
};

/// Which linear characterization defines the estimate.
///   open_loop:        sum w_i e^{A* t_i} C* chi_i = 0
///   closed_loop(k):   same with the closed-loop propagator and z[x]
///   bias:             kernel e^{-A t_i}  (uncorrected BFN limit)
///   scalar_corrected: kernel e^{-A t_i} e^{-||Q/2|| t_i}
struct Variant {
  enum class Kind { kOpenLoop, kClosedLoop, kBias, kScalarCorrected };
  Kind kind{Kind::kOpenLoop};
  double kappa{0};

  static Variant open_loop() { return {}; }
  static Variant closed_loop(double kappa) { return {Kind::kClosedLoop, kappa}; }
  static Variant bias() { return {Kind::kBias, 0}; }
  static Variant scalar_corrected() { return {Kind::kScalarCorrected, 0}; }

  Loop loop() const { return kind == Kind::kClosedLoop ? Loop::closed(kappa) : Loop::open(); }
  std::string name() const;
};

struct VariationalSolution {
  Eigen::VectorXd x_opt;
  Eigen::MatrixXd gramian;        // observability Gramian of the variant's loop
  Eigen::MatrixXd system_matrix;  // left-hand side of the characterization
  double delta{0};
  Eigen::MatrixXd chi;            // y - C z[x_opt] at the grid nodes
  double cost_value{0};
  double residual{0};
  Variant variant;
};

/// G = sum_i w_i Phi_i* C* C Phi_i, with Phi the open or closed-loop propagator.
Eigen::MatrixXd assemble_gramian(const SystemDesc<double>& sys, const TimeGrid& grid, const Loop& loop);

/// Smallest W-eigenvalue of the Gramian.  Throws NotObservable if <= 1e-12.
double observability_delta(const SystemDesc<double>& sys, const Eigen::Ref<const Eigen::MatrixXd>& gramian);

/// z[x] with feedback, stepped with the same integrator the observers use.
Trajectory simulate_closed_loop(const SystemDesc<double>& sys, const Eigen::VectorXd& x0,
                                const LoadSpec& load, const ObservationSeries& y, double kappa);

/// The characterization of one variant assembled as  M x = b  on fixed data.
class Characterization {
 public:
  Characterization(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                   const TimeGrid& grid, const Variant& variant);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  const Eigen::MatrixXd& gramian() const { return gramian_; }
  const Variant& variant() const { return variant_; }

  /// ||b - M x||_W.
  double residual(const Eigen::VectorXd& x) const;
  /// Solves M x = b.  Throws SingularSystem when the W-condition number exceeds 1e12.
  Eigen::VectorXd solve() const;

 private:
  Eigen::MatrixXd w_mat_;
  Eigen::MatrixXd w_sqrt_;
  Eigen::MatrixXd w_inv_sqrt_;
  Variant variant_;
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd rhs_;
  Eigen::MatrixXd gramian_;
};

VariationalSolution variational_minimizer(const SystemDesc<double>& sys, const ObservationSeries& y,
                                          const LoadSpec& load, const TimeGrid& grid,
                                          const Variant& variant);

/// J(x) = 1/2 sum_i w_i ||y_i - C z[x](t_i)||^2.
double cost_J(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
              const Eigen::VectorXd& x, const TimeGrid& grid, const Loop& loop);

/// W-norm of the variant's characterization integral at x, evaluated from a
/// freshly simulated z[x].
double residual_characterization(const SystemDesc<double>& sys, const ObservationSeries& y,
                                 const LoadSpec& load, const Eigen::VectorXd& x,
                                 const TimeGrid& grid, const Variant& variant);

}  // namespace bfn
