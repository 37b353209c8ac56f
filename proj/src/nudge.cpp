#include "bfn/nudge.hpp"

#include <algorithm>
#include <cmath>

namespace bfn {

GainSchedule GainSchedule::constant(double kappa) {
  if (!(kappa > 0.0)) raise(ErrorKind::kValidationError, "observer gain must be positive");
  return {Kind::kConstant, kappa, {}};
}

GainSchedule GainSchedule::harmonic(double kappa) {
  if (!(kappa > 0.0)) raise(ErrorKind::kValidationError, "observer gain must be positive");
  return {Kind::kHarmonic, kappa, {}};
}

GainSchedule GainSchedule::custom(std::vector<double> gains) {
  if (gains.empty()) raise(ErrorKind::kValidationError, "custom schedule needs at least one gain");
  for (double g : gains) {
    if (!(g > 0.0)) raise(ErrorKind::kValidationError, "observer gains must be positive");
  }
  const double first = gains.front();
  return {Kind::kCustom, first, std::move(gains)};
}

std::string GainSchedule::name() const {
  switch (kind) {
    case Kind::kConstant: return "constant";
    case Kind::kHarmonic: return "harmonic";
    case Kind::kCustom: return "custom";
  }
  return "unknown";
}

double gain(const GainSchedule& schedule, int j) {
  if (j < 1) raise(ErrorKind::kValidationError, "gain index starts at 1");
  switch (schedule.kind) {
    case GainSchedule::Kind::kConstant: return schedule.kappa;
    case GainSchedule::Kind::kHarmonic: return schedule.kappa / j;
    case GainSchedule::Kind::kCustom: {
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(j - 1), schedule.sequence.size() - 1);
      return schedule.sequence[idx];
    }
  }
  return 0.0;
}

std::string to_string(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::kIdentity: return "identity";
    case CorrectionMode::kScalarDecay: return "scalar_decay";
    case CorrectionMode::kExact: return "exact";
  }
  return "unknown";
}

ObserverSweeps::ObserverSweeps(const SystemDesc<double>& sys, const CorrectionSpec& corr, const TimeGrid& grid,
                               const ObservationSeries* y, const LoadSpec& load)
    : grid_(grid),
      forward_step_(semigroup_matrix(sys, grid.h()), grid.h()),
      backward_step_(semigroup_matrix(sys, -grid.h()), grid.h()) {
  if (y != nullptr) {
    if (!(y->grid == grid)) raise(ErrorKind::kGridMismatch, "observations sampled on a different grid");
    if (y->samples.rows() != sys.outputs()) raise(ErrorKind::kDimensionMismatch, "observation channels differ from C");
  }
  const Eigen::Index n = sys.dim();
  const Eigen::Index nodes = grid.nodes();
  const Eigen::MatrixXd c_adj = observation_adjoint(sys);
  ctc_ = c_adj * sys.c_mat;
  data_ = Eigen::MatrixXd::Zero(n, nodes);
  if (corr.mode == CorrectionMode::kExact) {
    k_ctc_.resize(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
      const Eigen::MatrixXd k = correction_operator(sys, grid.time(i), CorrectionMode::kExact);
      k_ctc_[i] = k * ctc_;
      if (y != nullptr) data_.col(i) = k * (c_adj * y->samples.col(i));
    }
  } else {
    k_scalar_.resize(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
      k_scalar_[i] = correction_scalar(sys.q_half_norm, grid.time(i), corr.mode);
      if (y != nullptr) data_.col(i) = k_scalar_[i] * (c_adj * y->samples.col(i));
    }
  }
  has_load_ = !load.is_zero();
  if (has_load_) {
    load_.resize(n, nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) load_.col(i) = load.evaluate(grid.time(i), n);
  }
}

template <bool Backward>
Eigen::VectorXd ObserverSweeps::sweep(const Eigen::VectorXd& z_init, double kappa) const {
  if (z_init.size() != ctc_.rows()) raise(ErrorKind::kDimensionMismatch, "initial state has wrong dimension");
  const ExponentialTrapezoid& stepper = Backward ? backward_step_ : forward_step_;
  const Eigen::Index last = grid_.n_steps();
  const Eigen::Index dim = z_init.size();
  auto rhs = [&](Eigen::Index i, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    // The backward observer runs in reversed time: node i reads data at T - t_i.
    const Eigen::Index node = Backward ? last - i : i;
    Eigen::VectorXd f(dim);
    if (has_load_) {
      if constexpr (Backward) f = -load_.col(node);
      else f = load_.col(node);
    } else {
      f.setZero();
    }
    if (kappa != 0.0) {
      if (k_ctc_.empty()) {
        f.noalias() += kappa * data_.col(node);
        f.noalias() -= (kappa * k_scalar_[node]) * (ctc_ * z);
      } else {
        f.noalias() += kappa * data_.col(node);
        f.noalias() -= kappa * (k_ctc_[node] * z);
      }
    }
    return f;
  };
  Eigen::VectorXd z = z_init;
  for (Eigen::Index i = 0; i < last; ++i) z = stepper.advance(i, z, rhs);
  return z;
}

Eigen::VectorXd ObserverSweeps::forward(const Eigen::VectorXd& z_init, double kappa) const {
  return sweep<false>(z_init, kappa);
}

Eigen::VectorXd ObserverSweeps::backward(const Eigen::VectorXd& z_init, double kappa) const {
  return sweep<true>(z_init, kappa);
}

Eigen::VectorXd forward_sweep(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                              double kappa, const CorrectionSpec& corr, const TimeGrid& grid,
                              const Eigen::VectorXd& z_init) {
  return ObserverSweeps(sys, corr, grid, &y, load).forward(z_init, kappa);
}

Eigen::VectorXd backward_sweep(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                               double kappa, const CorrectionSpec& corr, const TimeGrid& grid,
                               const Eigen::VectorXd& z_init) {
  return ObserverSweeps(sys, corr, grid, &y, load).backward(z_init, kappa);
}

Variant matched_variant(const SystemDesc<double>& sys, const GainSchedule& schedule, const CorrectionSpec& corr) {
  if (schedule.kind == GainSchedule::Kind::kConstant) return Variant::closed_loop(schedule.kappa);
  switch (corr.mode) {
    case CorrectionMode::kExact: return Variant::open_loop();
    case CorrectionMode::kScalarDecay: return Variant::scalar_corrected();
    case CorrectionMode::kIdentity: break;
  }
  return check_esad(sys).is_skew ? Variant::open_loop() : Variant::bias();
}

BfnRunRecord bfn_run(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                     const GainSchedule& schedule, const CorrectionSpec& corr, const TimeGrid& grid,
                     const BfnOptions& options) {
  if (options.max_iter < 1) raise(ErrorKind::kValidationError, "max_iter must be at least 1");
  if (options.tol < 0.0) raise(ErrorKind::kValidationError, "tol must be nonnegative");
  const Eigen::Index n = sys.dim();
  if (options.reference && options.reference->size() != n) {
    raise(ErrorKind::kDimensionMismatch, "reference state has wrong dimension");
  }

  const ObserverSweeps sweeps(sys, corr, grid, &y, load);
  BfnRunRecord record;
  record.target = matched_variant(sys, schedule, corr);
  const Characterization characterization(sys, y, load, grid, record.target);
  const Loop loop = record.target.loop();
  const bool skew = check_esad(sys).is_skew;
  if (schedule.kind == GainSchedule::Kind::kConstant && !skew) {
    record.warnings.push_back("constant gain on a dissipative generator: the closed-loop minimizer is only approximate");
  }
  if (corr.mode == CorrectionMode::kIdentity && !skew && schedule.kind != GainSchedule::Kind::kConstant) {
    record.warnings.push_back("uncorrected colocated feedback on a dissipative generator converges to the biased estimate");
  }
  if (options.reference) record.errors_to_reference.emplace();

  Eigen::VectorXd x = options.initial ? *options.initial : Eigen::VectorXd::Zero(n);
  if (x.size() != n) raise(ErrorKind::kDimensionMismatch, "initial iterate has wrong dimension");
  for (int j = 1; j <= options.max_iter; ++j) {
    const double kappa = gain(schedule, j);
    const Eigen::VectorXd terminal = sweeps.forward(x, kappa);
    Eigen::VectorXd next = sweeps.backward(terminal, kappa);

    const double change = weighted_norm<double>(sys, next - x);
    record.gains_used.push_back(kappa);
    record.costs.push_back(cost_J(sys, y, load, next, grid, loop));
    record.char_residuals.push_back(characterization.residual(next));
    if (options.reference) record.errors_to_reference->push_back(weighted_norm<double>(sys, next - *options.reference));
    record.iterates.push_back(next);
    x = std::move(next);
    if (change < options.tol * (1.0 + weighted_norm<double>(sys, x))) {
      record.converged = true;
      break;
    }
  }
  return record;
}

}  // namespace bfn
