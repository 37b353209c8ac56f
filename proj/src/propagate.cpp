#include "bfn/propagate.hpp"

#include <random>

namespace bfn {

TimeGrid::TimeGrid(double t_final, int n_steps) : t_final_(t_final), n_steps_(n_steps) {
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    raise(ErrorKind::kValidationError, "t_final must be positive and finite");
  }
  if (n_steps < 2) raise(ErrorKind::kValidationError, "n_steps must be at least 2");
  h_ = t_final / n_steps;
}

Eigen::VectorXd TimeGrid::weights() const {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(nodes(), h_);
  w(0) = w(n_steps_) = h_ / 2;
  return w;
}

double l2_norm(const TimeGrid& grid, const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.cols() != grid.nodes()) raise(ErrorKind::kGridMismatch, "samples do not match grid");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) acc += grid.weight(i) * samples.col(i).squaredNorm();
  return std::sqrt(acc);
}

Eigen::VectorXd LoadSpec::evaluate(double t, Eigen::Index dim) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dim);
  if (kind == Kind::kZero) return f;
  const Eigen::Index idx = velocity_index(mode - 1);
  if (mode < 1 || idx >= dim) raise(ErrorKind::kDimensionMismatch, "load mode outside the model");
  f(idx) = amplitude * std::sin(frequency * t);
  return f;
}

Trajectory simulate_trajectory(const SystemDesc<double>& sys, const Eigen::VectorXd& x0,
                               const LoadSpec& load, const TimeGrid& grid,
                               std::optional<InputNoise> input_noise) {
  if (x0.size() != sys.dim()) raise(ErrorKind::kDimensionMismatch, "initial state has wrong dimension");
  const Eigen::Index dim = sys.dim();
  const ExponentialTrapezoid stepper(semigroup_matrix(sys, grid.h()), grid.h());

  Trajectory traj{grid, Eigen::MatrixXd(dim, grid.nodes())};
  traj.states.col(0) = x0;

  std::optional<std::mt19937_64> rng;
  std::normal_distribution<double> normal(0.0, 1.0);
  if (input_noise && input_noise->sigma > 0.0) rng.emplace(input_noise->seed);

  Eigen::VectorXd z = x0;
  Eigen::VectorXd f_now = load.evaluate(grid.time(0), dim);
  Eigen::VectorXd eta(dim);
  for (Eigen::Index i = 0; i < grid.n_steps(); ++i) {
    Eigen::VectorXd f_next = load.evaluate(grid.time(i + 1), dim);
    z = stepper.advance(z, f_now, f_next);
    if (rng) {
      // Piecewise-constant disturbance on [t_i, t_{i+1}], trapezoid of e^{A(h-s)} eta.
      for (Eigen::Index k = 0; k < dim; ++k) eta(k) = input_noise->sigma * normal(*rng);
      z += (grid.h() / 2) * (stepper.step_matrix() * eta + eta);
    }
    traj.states.col(i + 1) = z;
    f_now = std::move(f_next);
  }
  return traj;
}

ObservationSeries synthesize_observations(const Trajectory& traj, const SystemDesc<double>& sys,
                                          double sigma, std::uint64_t seed) {
  if (traj.states.rows() != sys.dim()) raise(ErrorKind::kDimensionMismatch, "trajectory does not match system");
  if (sigma < 0.0) raise(ErrorKind::kValidationError, "noise sigma must be nonnegative");
  ObservationSeries series{traj.grid, sys.c_mat * traj.states, seed, sigma};
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < series.samples.cols(); ++i) {
      for (Eigen::Index k = 0; k < series.samples.rows(); ++k) series.samples(k, i) += sigma * normal(rng);
    }
  }
  return series;
}

}  // namespace bfn
