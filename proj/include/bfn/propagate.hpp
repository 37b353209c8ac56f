#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bfn/model.hpp"

namespace bfn {

// ---------------------------------------------------------------------------
// Closed-form modal blocks.

/// e^{At} restricted to one mode, A_j = [[0, 1], [-lambda, -eps]].
/// Negative t gives the backward group.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> semigroup_block(Scalar lambda, Scalar epsilon, Scalar t) {
  const Scalar disc = lambda - epsilon * epsilon / Scalar(4);
  if (!(disc > Scalar(0))) raise(ErrorKind::kDissipationTooLarge, "need epsilon^2 < 4 lambda");
  const Scalar omega = std::sqrt(disc);
  const Scalar c = std::cos(omega * t);
  const Scalar s = std::sin(omega * t);
  const Scalar decay = std::exp(-epsilon * t / Scalar(2));
  const Scalar skew = epsilon / (Scalar(2) * omega) * s;
  Eigen::Matrix<Scalar, 2, 2> block;
  block << c + skew, s / omega,
           -lambda / omega * s, c - skew;
  return decay * block;
}

/// e^{At} e^{A*t} restricted to one mode, adjoint taken in diag(lambda, 1).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> correction_block(Scalar lambda, Scalar epsilon, Scalar t) {
  const Scalar quarter = epsilon * epsilon / Scalar(4);
  const Scalar omega_sq = lambda - quarter;
  if (!(omega_sq > Scalar(0))) raise(ErrorKind::kDissipationTooLarge, "need epsilon^2 < 4 lambda");
  const Scalar omega = std::sqrt(omega_sq);
  const Scalar c = std::cos(omega * t);
  const Scalar s = std::sin(omega * t);
  const Scalar ratio = (lambda + quarter) / omega_sq;
  const Scalar cross = epsilon / omega * s * c;
  Eigen::Matrix<Scalar, 2, 2> block;
  block << c * c + cross + ratio * s * s, -epsilon / omega_sq * s * s,
           -lambda * epsilon / omega_sq * s * s, c * c - cross + ratio * s * s;
  return std::exp(-epsilon * t) * block;
}

/// Dense e^{At}: blockwise closed form for wave models, matrix exponential otherwise.
template <typename Scalar>
MatrixX<Scalar> semigroup_matrix(const SystemDesc<Scalar>& sys, Scalar t) {
  if (sys.is_wave()) {
    const auto& spec = *sys.spectrum;
    MatrixX<Scalar> s = MatrixX<Scalar>::Zero(sys.dim(), sys.dim());
    for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
      s.template block<2, 2>(2 * j, 2 * j) = semigroup_block<Scalar>(spec.lambdas(j), spec.epsilon, t);
    }
    return s;
  }
  const MatrixX<Scalar> at = sys.a_mat * t;
  return at.exp();
}

template <typename Scalar>
VectorX<Scalar> apply_semigroup(const SystemDesc<Scalar>& sys, Scalar t,
                                const Eigen::Ref<const VectorX<Scalar>>& x) {
  if (x.size() != sys.dim()) raise(ErrorKind::kDimensionMismatch, "state has wrong dimension");
  if (sys.is_wave()) {
    const auto& spec = *sys.spectrum;
    VectorX<Scalar> out(x.size());
    for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
      out.template segment<2>(2 * j) =
          semigroup_block<Scalar>(spec.lambdas(j), spec.epsilon, t) * x.template segment<2>(2 * j);
    }
    return out;
  }
  return semigroup_matrix<Scalar>(sys, t) * x;
}

enum class CorrectionMode { kIdentity, kScalarDecay, kExact };

/// Feedback correction K(t): I, e^{-||Q/2|| t} I, or P(t) = e^{At} e^{A*t}.
template <typename Scalar>
MatrixX<Scalar> correction_operator(const SystemDesc<Scalar>& sys, Scalar t, CorrectionMode mode) {
  const Eigen::Index n = sys.dim();
  switch (mode) {
    case CorrectionMode::kIdentity:
      return MatrixX<Scalar>::Identity(n, n);
    case CorrectionMode::kScalarDecay:
      return std::exp(-sys.q_half_norm * t) * MatrixX<Scalar>::Identity(n, n);
    case CorrectionMode::kExact:
      break;
  }
  if (sys.is_wave()) {
    const auto& spec = *sys.spectrum;
    MatrixX<Scalar> p = MatrixX<Scalar>::Zero(n, n);
    for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
      p.template block<2, 2>(2 * j, 2 * j) = correction_block<Scalar>(spec.lambdas(j), spec.epsilon, t);
    }
    return p;
  }
  const MatrixX<Scalar> s = semigroup_matrix<Scalar>(sys, t);
  return s * weighted_adjoint<Scalar>(sys, s);
}

/// Scalar k(t) paired with a correction mode (1 for identity).
inline double correction_scalar(double q_half_norm, double t, CorrectionMode mode) {
  return mode == CorrectionMode::kIdentity ? 1.0 : std::exp(-q_half_norm * t);
}

// ---------------------------------------------------------------------------
// Time discretization.

/// Uniform grid on [0, T] with trapezoidal quadrature weights.
class TimeGrid {
 public:
  TimeGrid(double t_final, int n_steps);

  double t_final() const { return t_final_; }
  int n_steps() const { return n_steps_; }
  Eigen::Index nodes() const { return n_steps_ + 1; }
  double h() const { return h_; }
  double time(Eigen::Index i) const { return t_final_ * double(i) / double(n_steps_); }
  double weight(Eigen::Index i) const { return (i == 0 || i == n_steps_) ? h_ / 2 : h_; }
  Eigen::VectorXd weights() const;

  /// Same grid with every step split in two.
  TimeGrid refined(int factor = 2) const { return TimeGrid(t_final_, n_steps_ * factor); }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t_final_;
  int n_steps_;
  double h_;
};

/// Trapezoidal L^2(0, T) norm of node samples stored column-wise.
double l2_norm(const TimeGrid& grid, const Eigen::Ref<const Eigen::MatrixXd>& samples);

/// Known load f(t).  modal_sinusoid forces the velocity equation of one mode.
struct LoadSpec {
  enum class Kind { kZero, kModalSinusoid };
  Kind kind{Kind::kZero};
  int mode{1};
  double amplitude{0};
  double frequency{0};

  static LoadSpec zero() { return {}; }
  static LoadSpec modal_sinusoid(int mode, double amplitude, double frequency) {
    return {Kind::kModalSinusoid, mode, amplitude, frequency};
  }

  bool is_zero() const { return kind == Kind::kZero || amplitude == 0.0; }
  Eigen::VectorXd evaluate(double t, Eigen::Index dim) const;
};

struct Trajectory {
  TimeGrid grid;
  Eigen::MatrixXd states;  // dim x nodes
};

struct ObservationSeries {
  TimeGrid grid;
  Eigen::MatrixXd samples;  // outputs x nodes
  std::optional<std::uint64_t> noise_seed;
  double noise_sigma{0};
};

struct InputNoise {
  double sigma{0};
  std::uint64_t seed{0};
};

/// One step of the exponential trapezoidal rule for  z' = M z + F(t, z)
/// where S = e^{Mh} is exact:
///   z+ = S (z + h/2 F_i(z)) + h/2 F_{i+1}(S (z + h F_i(z))).
class ExponentialTrapezoid {
 public:
  ExponentialTrapezoid(Eigen::MatrixXd step, double h) : step_(std::move(step)), h_(h) {}

  const Eigen::MatrixXd& step_matrix() const { return step_; }
  double h() const { return h_; }

  /// Forcing that does not depend on the state.
  Eigen::VectorXd advance(const Eigen::VectorXd& z, const Eigen::VectorXd& f_now,
                          const Eigen::VectorXd& f_next) const {
    Eigen::VectorXd out = step_ * (z + (h_ / 2) * f_now);
    out.noalias() += (h_ / 2) * f_next;
    return out;
  }

  /// rhs(i, z) evaluates F at node i.
  template <typename Rhs>
  Eigen::VectorXd advance(Eigen::Index i, const Eigen::VectorXd& z, Rhs&& rhs) const {
    const Eigen::VectorXd f_now = rhs(i, z);
    const Eigen::VectorXd predictor = step_ * (z + h_ * f_now);
    return advance(z, f_now, rhs(i + 1, predictor));
  }

 private:
  Eigen::MatrixXd step_;
  double h_;
};

Trajectory simulate_trajectory(const SystemDesc<double>& sys, const Eigen::VectorXd& x0,
                               const LoadSpec& load, const TimeGrid& grid,
                               std::optional<InputNoise> input_noise = std::nullopt);

/// y_i = C z_i + sigma g_i with g_i standard Gaussian from a seeded generator.
ObservationSeries synthesize_observations(const Trajectory& traj, const SystemDesc<double>& sys,
                                          double sigma, std::uint64_t seed);

}  // namespace bfn
