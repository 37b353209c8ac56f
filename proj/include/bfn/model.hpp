#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "bfn/error.hpp"

namespace bfn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Spectral data of the damped wave operator on (0, pi) with Dirichlet
/// conditions: lambda_j = j^2 and e_j(x) = sqrt(2/pi) sin(j x).
template <typename Scalar>
struct WaveSpectrum {
  VectorX<Scalar> lambdas;
  Scalar epsilon{0};
};

/// Finite-dimensional linear system  z' = A z,  y = C z  on a state space
/// whose inner product is <x, y>_W = x^T W y.  The output space is Euclidean.
///
/// Build it with make_system() (or build_wave_model()), which fills the
/// derived weight factors and Q = -(A + A*).
template <typename Scalar = double>
struct SystemDesc {
  MatrixX<Scalar> a_mat;
  MatrixX<Scalar> c_mat;
  MatrixX<Scalar> w_mat;
  MatrixX<Scalar> q_mat;
  Scalar q_half_norm{0};

  MatrixX<Scalar> w_inv;
  MatrixX<Scalar> w_sqrt;
  MatrixX<Scalar> w_inv_sqrt;

  /// Present only for spectral wave models; enables closed-form semigroups.
  std::optional<WaveSpectrum<Scalar>> spectrum;

  Eigen::Index dim() const { return a_mat.rows(); }
  Eigen::Index outputs() const { return c_mat.rows(); }
  bool is_wave() const { return spectrum.has_value(); }
};

template <typename Scalar>
struct EsadReport {
  MatrixX<Scalar> q_mat;
  Scalar q_half_norm{0};
  bool is_skew{false};
};

// ---------------------------------------------------------------------------
// Weighted geometry.

template <typename Scalar>
Scalar weighted_dot(const SystemDesc<Scalar>& sys, const Eigen::Ref<const VectorX<Scalar>>& x,
                    const Eigen::Ref<const VectorX<Scalar>>& y) {
  return x.dot(sys.w_mat * y);
}

template <typename Scalar>
Scalar weighted_norm(const SystemDesc<Scalar>& sys, const Eigen::Ref<const VectorX<Scalar>>& x) {
  return std::sqrt(std::max(Scalar(0), weighted_dot<Scalar>(sys, x, x)));
}

/// Adjoint of a state-space operator M in the W inner product: W^-1 M^T W.
template <typename Scalar>
MatrixX<Scalar> weighted_adjoint(const SystemDesc<Scalar>& sys,
                                 const Eigen::Ref<const MatrixX<Scalar>>& mat) {
  if (mat.rows() != sys.dim() || mat.cols() != sys.dim()) {
    raise(ErrorKind::kDimensionMismatch, "weighted_adjoint expects a dim x dim operator");
  }
  return sys.w_inv * mat.transpose() * sys.w_mat;
}

/// Adjoint of an observation-type operator (state -> Euclidean output): W^-1 C^T.
template <typename Scalar>
MatrixX<Scalar> observation_adjoint(const SystemDesc<Scalar>& sys,
                                    const Eigen::Ref<const MatrixX<Scalar>>& c) {
  if (c.cols() != sys.dim()) {
    raise(ErrorKind::kDimensionMismatch, "observation operator must have dim columns");
  }
  return sys.w_inv * c.transpose();
}

template <typename Scalar>
MatrixX<Scalar> observation_adjoint(const SystemDesc<Scalar>& sys) {
  return observation_adjoint<Scalar>(sys, sys.c_mat);
}

/// Largest singular value of codomain_sqrt * M * domain_inv_sqrt, i.e. the
/// operator norm between the two weighted spaces.
template <typename Scalar>
Scalar operator_norm(const Eigen::Ref<const MatrixX<Scalar>>& mat,
                     const Eigen::Ref<const MatrixX<Scalar>>& domain_inv_sqrt,
                     const Eigen::Ref<const MatrixX<Scalar>>& codomain_sqrt) {
  if (domain_inv_sqrt.rows() != mat.cols() || codomain_sqrt.cols() != mat.rows()) {
    raise(ErrorKind::kDimensionMismatch, "operator_norm weight sizes do not match the operator");
  }
  if (mat.size() == 0) return Scalar(0);
  const MatrixX<Scalar> scaled = codomain_sqrt * mat * domain_inv_sqrt;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(scaled);
  return svd.singularValues()(0);
}

/// ||M||_{L(X)} for a state operator.
template <typename Scalar>
Scalar state_operator_norm(const SystemDesc<Scalar>& sys,
                           const Eigen::Ref<const MatrixX<Scalar>>& mat) {
  if (mat.rows() != sys.dim() || mat.cols() != sys.dim()) {
    raise(ErrorKind::kDimensionMismatch, "state_operator_norm expects a dim x dim operator");
  }
  return operator_norm<Scalar>(mat, sys.w_inv_sqrt, sys.w_sqrt);
}

/// ||C||_{L(X,Y)} with Y Euclidean.
template <typename Scalar>
Scalar observation_norm(const SystemDesc<Scalar>& sys) {
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(sys.outputs(), sys.outputs());
  return operator_norm<Scalar>(sys.c_mat, sys.w_inv_sqrt, eye);
}

/// Symmetric matrix W^{1/2} M W^{-1/2} for a W-self-adjoint M.
template <typename Scalar>
MatrixX<Scalar> weighted_symmetric_form(const SystemDesc<Scalar>& sys,
                                        const Eigen::Ref<const MatrixX<Scalar>>& mat) {
  MatrixX<Scalar> s = sys.w_sqrt * mat * sys.w_inv_sqrt;
  return (s + s.transpose()) / Scalar(2);
}

// ---------------------------------------------------------------------------
// ESAD structure.

/// Q = -(A + A*) with its W-spectral checks.  Throws NotEsad if Q has an
/// eigenvalue below -1e-10.
template <typename Scalar>
EsadReport<Scalar> check_esad(const SystemDesc<Scalar>& sys) {
  EsadReport<Scalar> report;
  MatrixX<Scalar> q = -(sys.a_mat + weighted_adjoint<Scalar>(sys, sys.a_mat));
  // A + A* is W-symmetric in exact arithmetic; remove the roundoff part.
  q = (q + weighted_adjoint<Scalar>(sys, q)) / Scalar(2);
  const MatrixX<Scalar> qs = weighted_symmetric_form<Scalar>(sys, q);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(qs, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (ev.size() > 0 && ev(0) < Scalar(-1e-10)) {
    raise(ErrorKind::kNotEsad, "A + A* has a positive eigenvalue " + std::to_string(double(-ev(0))));
  }
  const Scalar q_norm = ev.size() > 0 ? std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1))) : 0;
  report.q_mat = std::move(q);
  report.q_half_norm = ev.size() > 0 ? std::max(Scalar(0), ev(ev.size() - 1)) / Scalar(2) : 0;
  report.is_skew = q_norm < Scalar(1e-12);
  return report;
}

/// Builds a validated dense system.  W must be symmetric positive definite.
template <typename Scalar>
SystemDesc<Scalar> make_system(MatrixX<Scalar> a, MatrixX<Scalar> c, MatrixX<Scalar> w) {
  const Eigen::Index n = a.rows();
  if (n < 1 || a.cols() != n) raise(ErrorKind::kDimensionMismatch, "A must be square and nonempty");
  if (w.rows() != n || w.cols() != n) raise(ErrorKind::kDimensionMismatch, "W must match A");
  if (c.cols() != n) raise(ErrorKind::kDimensionMismatch, "C must have dim columns");
  const Scalar w_scale = std::max(Scalar(1), w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * w_scale) {
    raise(ErrorKind::kValidationError, "W must be symmetric");
  }
  w = (w + w.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(w);
  if (eig.eigenvalues()(0) <= Scalar(0)) raise(ErrorKind::kValidationError, "W must be positive definite");

  SystemDesc<Scalar> sys;
  sys.a_mat = std::move(a);
  sys.c_mat = std::move(c);
  sys.w_sqrt = eig.operatorSqrt();
  sys.w_inv_sqrt = eig.operatorInverseSqrt();
  sys.w_inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
              eig.eigenvectors().transpose();
  sys.w_mat = std::move(w);
  const EsadReport<Scalar> esad = check_esad(sys);
  sys.q_mat = esad.q_mat;
  sys.q_half_norm = esad.q_half_norm;
  return sys;
}

// ---------------------------------------------------------------------------
// Spectral wave model  u_tt = u_xx - eps u_t  on (0, pi).

template <typename Scalar = double>
struct WaveModalModel {
  int n_modes{0};
  Scalar epsilon{0};
  VectorX<Scalar> lambdas;
  VectorX<Scalar> omegas;
  SystemDesc<Scalar> system;
};

/// Fourier coefficients of (u0, v0) in the sine basis.
template <typename Scalar = double>
struct ModalState {
  VectorX<Scalar> alphas;
  VectorX<Scalar> betas;
};

enum class ObservedField { kVelocity, kDisplacement };

template <typename Scalar = double>
struct ObservationSpec {
  Scalar a{0};
  Scalar b{std::numbers::pi_v<Scalar> / 2};
  int m{1};
  ObservedField field{ObservedField::kVelocity};
};

// States are stored mode by mode: (alpha_1, beta_1, alpha_2, beta_2, ...).
constexpr Eigen::Index displacement_index(Eigen::Index mode) { return 2 * mode; }
constexpr Eigen::Index velocity_index(Eigen::Index mode) { return 2 * mode + 1; }

template <typename Scalar>
VectorX<Scalar> to_state(const ModalState<Scalar>& modal) {
  if (modal.alphas.size() != modal.betas.size()) {
    raise(ErrorKind::kDimensionMismatch, "alphas and betas differ in length");
  }
  VectorX<Scalar> x(2 * modal.alphas.size());
  for (Eigen::Index j = 0; j < modal.alphas.size(); ++j) {
    x(displacement_index(j)) = modal.alphas(j);
    x(velocity_index(j)) = modal.betas(j);
  }
  return x;
}

template <typename Scalar>
ModalState<Scalar> to_modal(const Eigen::Ref<const VectorX<Scalar>>& x) {
  if (x.size() % 2 != 0) raise(ErrorKind::kDimensionMismatch, "modal state must have even size");
  ModalState<Scalar> modal{VectorX<Scalar>(x.size() / 2), VectorX<Scalar>(x.size() / 2)};
  for (Eigen::Index j = 0; j < modal.alphas.size(); ++j) {
    modal.alphas(j) = x(displacement_index(j));
    modal.betas(j) = x(velocity_index(j));
  }
  return modal;
}

template <typename Scalar>
WaveModalModel<Scalar> build_wave_model(int n_modes, Scalar epsilon) {
  if (n_modes < 1) raise(ErrorKind::kDimensionMismatch, "n_modes must be positive");
  if (!(epsilon >= Scalar(0))) raise(ErrorKind::kValidationError, "epsilon must be nonnegative");
  // lambda_1 = 1 on (0, pi).
  if (epsilon * epsilon >= Scalar(4)) {
    raise(ErrorKind::kDissipationTooLarge, "need epsilon^2 < 4 lambda_1 = 4");
  }
  WaveModalModel<Scalar> model;
  model.n_modes = n_modes;
  model.epsilon = epsilon;
  model.lambdas.resize(n_modes);
  model.omegas.resize(n_modes);
  const Eigen::Index dim = 2 * n_modes;
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(dim, dim);
  MatrixX<Scalar> w = MatrixX<Scalar>::Zero(dim, dim);
  for (int j = 0; j < n_modes; ++j) {
    const Scalar lambda = Scalar(j + 1) * Scalar(j + 1);
    model.lambdas(j) = lambda;
    model.omegas(j) = std::sqrt(lambda - epsilon * epsilon / Scalar(4));
    const Eigen::Index u = displacement_index(j);
    const Eigen::Index v = velocity_index(j);
    a(u, v) = Scalar(1);
    a(v, u) = -lambda;
    a(v, v) = -epsilon;
    w(u, u) = lambda;
    w(v, v) = Scalar(1);
  }

  SystemDesc<Scalar>& sys = model.system;
  sys.w_inv = MatrixX<Scalar>::Zero(dim, dim);
  sys.w_sqrt = MatrixX<Scalar>::Zero(dim, dim);
  sys.w_inv_sqrt = MatrixX<Scalar>::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    sys.w_inv(k, k) = Scalar(1) / w(k, k);
    sys.w_sqrt(k, k) = std::sqrt(w(k, k));
    sys.w_inv_sqrt(k, k) = Scalar(1) / std::sqrt(w(k, k));
  }
  sys.a_mat = std::move(a);
  sys.w_mat = std::move(w);
  sys.c_mat = MatrixX<Scalar>::Zero(0, dim);
  sys.q_mat = MatrixX<Scalar>::Zero(dim, dim);
  for (int j = 0; j < n_modes; ++j) sys.q_mat(velocity_index(j), velocity_index(j)) = Scalar(2) * epsilon;
  sys.q_half_norm = epsilon;
  sys.spectrum = WaveSpectrum<Scalar>{model.lambdas, epsilon};
  return model;
}

/// Integral of e_i(x) e_j(x) over [a, b] for the sine basis on (0, pi);
/// i and j are 1-based mode numbers.
template <typename Scalar>
Scalar sine_overlap(int i, int j, Scalar a, Scalar b) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  if (i == j) {
    const Scalar k = Scalar(2 * i);
    auto prim = [&](Scalar x) { return x - std::sin(k * x) / k; };
    return (prim(b) - prim(a)) / pi;
  }
  const Scalar d = Scalar(i - j);
  const Scalar s = Scalar(i + j);
  auto prim = [&](Scalar x) { return std::sin(d * x) / d - std::sin(s * x) / s; };
  return (prim(b) - prim(a)) / pi;
}

/// Installs C: channel i reads <field, e_i>_{L^2(a,b)} of the truncated field.
template <typename Scalar>
SystemDesc<Scalar> build_observation(const WaveModalModel<Scalar>& model,
                                     const ObservationSpec<Scalar>& spec) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar slack = Scalar(1e-12);
  if (!(spec.b > spec.a) || spec.a < -slack || spec.b > pi + slack) {
    raise(ErrorKind::kInvalidInterval, "observation interval must satisfy 0 <= a < b <= pi");
  }
  if (spec.m < 1 || spec.m > model.n_modes) {
    raise(ErrorKind::kDimensionMismatch, "number of channels must lie in [1, n_modes]");
  }
  const Scalar a = std::max(Scalar(0), spec.a);
  const Scalar b = std::min(pi, spec.b);
  SystemDesc<Scalar> sys = model.system;
  sys.c_mat = MatrixX<Scalar>::Zero(spec.m, sys.dim());
  for (int i = 0; i < spec.m; ++i) {
    for (int j = 0; j < model.n_modes; ++j) {
      const Eigen::Index col =
          spec.field == ObservedField::kVelocity ? velocity_index(j) : displacement_index(j);
      sys.c_mat(i, col) = sine_overlap<Scalar>(i + 1, j + 1, a, b);
    }
  }
  return sys;
}

}  // namespace bfn
