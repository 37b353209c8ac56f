#include "bfn/varopt.hpp"

#include <cmath>

namespace bfn {
namespace {

void check_series(const SystemDesc<double>& sys, const ObservationSeries& y, const TimeGrid& grid) {
  if (!(y.grid == grid)) raise(ErrorKind::kGridMismatch, "observations sampled on a different grid");
  if (y.samples.rows() != sys.outputs() || y.samples.cols() != grid.nodes()) {
    raise(ErrorKind::kDimensionMismatch, "observation samples do not match the system outputs");
  }
}

double min_w_eigenvalue(const SystemDesc<double>& sys, const Eigen::Ref<const Eigen::MatrixXd>& gramian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weighted_symmetric_form<double>(sys, gramian),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

// Phi_i for every node: e^{A t_i} or the homogeneous closed-loop propagator.
std::vector<Eigen::MatrixXd> loop_propagators(const SystemDesc<double>& sys, const TimeGrid& grid,
                                              const Loop& loop) {
  const Eigen::Index n = sys.dim();
  std::vector<Eigen::MatrixXd> phi(grid.nodes());
  if (loop.kind == Loop::Kind::kOpen) {
    for (Eigen::Index i = 0; i < grid.nodes(); ++i) phi[i] = semigroup_matrix(sys, grid.time(i));
    return phi;
  }
  for (auto& p : phi) p.resize(n, n);
  const Eigen::MatrixXd feedback = loop.kappa * observation_adjoint(sys) * sys.c_mat;
  const ExponentialTrapezoid stepper(semigroup_matrix(sys, grid.h()), grid.h());
  auto rhs = [&](Eigen::Index, const Eigen::VectorXd& z) -> Eigen::VectorXd { return -(feedback * z); };
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXd z = Eigen::VectorXd::Unit(n, k);
    phi[0].col(k) = z;
    for (Eigen::Index i = 0; i < grid.n_steps(); ++i) {
      z = stepper.advance(i, z, rhs);
      phi[i + 1].col(k) = z;
    }
  }
  return phi;
}

Trajectory loop_trajectory(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
                           const Eigen::VectorXd& x, const TimeGrid& grid, const Loop& loop) {
  if (loop.kind == Loop::Kind::kOpen) return simulate_trajectory(sys, x, load, grid);
  return simulate_closed_loop(sys, x, load, y, loop.kappa);
}

// Multiplies C* chi_i inside the characterization integral.
Eigen::MatrixXd characterization_kernel(const SystemDesc<double>& sys, double t, const Eigen::MatrixXd& phi,
                                        const Variant& variant) {
  switch (variant.kind) {
    case Variant::Kind::kOpenLoop:
    case Variant::Kind::kClosedLoop:
      return weighted_adjoint<double>(sys, phi);
    case Variant::Kind::kBias:
      return semigroup_matrix(sys, -t);
    case Variant::Kind::kScalarCorrected:
      return std::exp(-sys.q_half_norm * t) * semigroup_matrix(sys, -t);
  }
  return {};
}

}  // namespace

std::string Variant::name() const {
  switch (kind) {
    case Kind::kOpenLoop: return "open_loop";
    case Kind::kClosedLoop: return "closed_loop";
    case Kind::kBias: return "bias";
    case Kind::kScalarCorrected: return "scalar_corrected";
  }
  return "unknown";
}

Eigen::MatrixXd assemble_gramian(const SystemDesc<double>& sys, const TimeGrid& grid, const Loop& loop) {
  if (loop.kind == Loop::Kind::kClosed && !(loop.kappa > 0.0)) {
    raise(ErrorKind::kValidationError, "closed-loop Gramian needs kappa > 0");
  }
  const std::vector<Eigen::MatrixXd> phi = loop_propagators(sys, grid, loop);
  const Eigen::MatrixXd ctc = sys.c_mat.transpose() * sys.c_mat;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.dim(), sys.dim());
  for (Eigen::Index i = 0; i < grid.nodes(); ++i) acc.noalias() += grid.weight(i) * phi[i].transpose() * ctc * phi[i];
  // acc = W G, symmetric by construction.
  acc = (acc + acc.transpose()) / 2;
  return sys.w_inv * acc;
}

double observability_delta(const SystemDesc<double>& sys, const Eigen::Ref<const Eigen::MatrixXd>& gramian) {
  if (gramian.rows() != sys.dim() || gramian.cols() != sys.dim()) {
    raise(ErrorKind::kDimensionMismatch, "Gramian does not match the system");
  }
  const double delta = min_w_eigenvalue(sys, gramian);
  if (!(delta > 1e-12)) raise(ErrorKind::kNotObservable, "observability constant is " + std::to_string(delta));
  return delta;
}

Trajectory simulate_closed_loop(const SystemDesc<double>& sys, const Eigen::VectorXd& x0, const LoadSpec& load,
                                const ObservationSeries& y, double kappa) {
  const TimeGrid& grid = y.grid;
  check_series(sys, y, grid);
  if (x0.size() != sys.dim()) raise(ErrorKind::kDimensionMismatch, "initial state has wrong dimension");
  const Eigen::MatrixXd c_adj = observation_adjoint(sys);
  const Eigen::MatrixXd feedback = c_adj * sys.c_mat;
  const ExponentialTrapezoid stepper(semigroup_matrix(sys, grid.h()), grid.h());
  auto rhs = [&](Eigen::Index i, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd f = load.evaluate(grid.time(i), sys.dim());
    f.noalias() += kappa * (c_adj * y.samples.col(i) - feedback * z);
    return f;
  };
  Trajectory traj{grid, Eigen::MatrixXd(sys.dim(), grid.nodes())};
  Eigen::VectorXd z = x0;
  traj.states.col(0) = z;
  for (Eigen::Index i = 0; i < grid.n_steps(); ++i) {
    z = stepper.advance(i, z, rhs);
    traj.states.col(i + 1) = z;
  }
  return traj;
}

Characterization::Characterization(const SystemDesc<double>& sys, const ObservationSeries& y,
                                   const LoadSpec& load, const TimeGrid& grid, const Variant& variant)
    : w_mat_(sys.w_mat), w_sqrt_(sys.w_sqrt), w_inv_sqrt_(sys.w_inv_sqrt), variant_(variant) {
  check_series(sys, y, grid);
  const Loop loop = variant.loop();
  if (loop.kind == Loop::Kind::kClosed && !(loop.kappa > 0.0)) {
    raise(ErrorKind::kValidationError, "closed-loop variant needs kappa > 0");
  }
  const Eigen::Index n = sys.dim();
  const std::vector<Eigen::MatrixXd> phi = loop_propagators(sys, grid, loop);
  // Zero-initial-state response to the load (and data, in closed loop).
  const Eigen::MatrixXd offset = loop_trajectory(sys, y, load, Eigen::VectorXd::Zero(n), grid, loop).states;
  const Eigen::MatrixXd c_adj = observation_adjoint(sys);
  const Eigen::MatrixXd ctc = c_adj * sys.c_mat;

  matrix_ = Eigen::MatrixXd::Zero(n, n);
  rhs_ = Eigen::VectorXd::Zero(n);
  gramian_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < grid.nodes(); ++i) {
    const double w = grid.weight(i);
    const Eigen::MatrixXd phi_adj = weighted_adjoint<double>(sys, phi[i]);
    const Eigen::MatrixXd kernel = characterization_kernel(sys, grid.time(i), phi[i], variant);
    const Eigen::MatrixXd kernel_c = kernel * c_adj;
    matrix_.noalias() += w * kernel * ctc * phi[i];
    rhs_.noalias() += w * kernel_c * (y.samples.col(i) - sys.c_mat * offset.col(i));
    gramian_.noalias() += w * phi_adj * ctc * phi[i];
  }
}

double Characterization::residual(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = rhs_ - matrix_ * x;
  return std::sqrt(std::max(0.0, r.dot(w_mat_ * r)));
}

Eigen::VectorXd Characterization::solve() const {
  const Eigen::MatrixXd scaled = w_sqrt_ * matrix_ * w_inv_sqrt_;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  const double smallest = sv(sv.size() - 1);
  if (!(largest > 0.0) || !(smallest > largest * 1e-12)) {
    raise(ErrorKind::kSingularSystem, variant_.name() + " characterization is numerically singular");
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(matrix_);
  Eigen::VectorXd x = lu.solve(rhs_);
  // One step of iterative refinement.
  x += lu.solve(rhs_ - matrix_ * x);
  return x;
}

VariationalSolution variational_minimizer(const SystemDesc<double>& sys, const ObservationSeries& y,
                                          const LoadSpec& load, const TimeGrid& grid, const Variant& variant) {
  const Characterization ch(sys, y, load, grid, variant);
  VariationalSolution sol;
  sol.variant = variant;
  sol.x_opt = ch.solve();
  sol.gramian = ch.gramian();
  sol.system_matrix = ch.matrix();
  sol.delta = min_w_eigenvalue(sys, sol.gramian);
  const Trajectory traj = loop_trajectory(sys, y, load, sol.x_opt, grid, variant.loop());
  sol.chi = y.samples - sys.c_mat * traj.states;
  const double l2 = l2_norm(grid, sol.chi);
  sol.cost_value = 0.5 * l2 * l2;
  sol.residual = ch.residual(sol.x_opt);
  return sol;
}

double cost_J(const SystemDesc<double>& sys, const ObservationSeries& y, const LoadSpec& load,
              const Eigen::VectorXd& x, const TimeGrid& grid, const Loop& loop) {
  check_series(sys, y, grid);
  const Trajectory traj = loop_trajectory(sys, y, load, x, grid, loop);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grid.nodes(); ++i) {
    acc += grid.weight(i) * (y.samples.col(i) - sys.c_mat * traj.states.col(i)).squaredNorm();
  }
  return 0.5 * acc;
}

double residual_characterization(const SystemDesc<double>& sys, const ObservationSeries& y,
                                 const LoadSpec& load, const Eigen::VectorXd& x, const TimeGrid& grid,
                                 const Variant& variant) {
  check_series(sys, y, grid);
  const Loop loop = variant.loop();
  const Trajectory traj = loop_trajectory(sys, y, load, x, grid, loop);
  std::vector<Eigen::MatrixXd> phi;
  if (loop.kind == Loop::Kind::kClosed) phi = loop_propagators(sys, grid, loop);
  const Eigen::MatrixXd c_adj = observation_adjoint(sys);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(sys.dim());
  for (Eigen::Index i = 0; i < grid.nodes(); ++i) {
    const double t = grid.time(i);
    const Eigen::MatrixXd propagator = phi.empty() ? semigroup_matrix(sys, t) : phi[i];
    const Eigen::VectorXd chi = y.samples.col(i) - sys.c_mat * traj.states.col(i);
    acc.noalias() += grid.weight(i) * characterization_kernel(sys, t, propagator, variant) * (c_adj * chi);
  }
  return weighted_norm<double>(sys, acc);
}

}  // namespace bfn
