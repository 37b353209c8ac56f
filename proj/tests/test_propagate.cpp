#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "bfn/propagate.hpp"
#include "oracles.hpp"

using namespace bfn;

namespace {

Eigen::VectorXd random_vec(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

Eigen::Matrix2d generator_block(double lambda, double eps) {
  Eigen::Matrix2d a;
  a << 0, 1, -lambda, -eps;
  return a;
}

double wnorm(const SystemDesc<double>& sys, const Eigen::VectorXd& x) { return oracle::w_norm(sys.w_mat, x); }

}  // namespace

TEST(SemigroupBlock, KnownValues) {
  const Eigen::Matrix2d quarter = semigroup_block<double>(1.0, 0.0, std::numbers::pi / 2);
  Eigen::Matrix2d expected;
  expected << 0, 1, -1, 0;
  EXPECT_LT((quarter - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((semigroup_block<double>(4.0, 0.3, 0.0) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd ref = oracle::expm(generator_block(1.0, 0.2));
  EXPECT_LT((Eigen::MatrixXd(semigroup_block<double>(1.0, 0.2, 1.0)) - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(semigroup_block<double>(1.0, 2.0, 1.0), Error);
}

TEST(SemigroupBlock, GroupProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 20; ++k) {
    const double lambda = 1 + k, eps = 0.05 * (k % 5), t = u(rng), s = u(rng);
    const Eigen::Matrix2d lhs = semigroup_block(lambda, eps, t) * semigroup_block(lambda, eps, s);
    EXPECT_LT((lhs - semigroup_block(lambda, eps, t + s)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ApplySemigroup, IdentityEnergyAndDenseOracle) {
  std::mt19937_64 rng(2);
  const auto skew = build_wave_model<double>(6, 0.0).system;
  const auto damped = build_wave_model<double>(6, 0.1).system;
  const Eigen::VectorXd x = random_vec(12, rng);
  EXPECT_EQ(apply_semigroup<double>(skew, 0.0, x), x);
  for (double t : {0.3, 1.7, 6.0, -2.5}) {
    EXPECT_NEAR(wnorm(skew, apply_semigroup<double>(skew, t, x)), wnorm(skew, x), 1e-10);
  }
  const Eigen::VectorXd ref = oracle::expm(damped.a_mat) * x;
  EXPECT_LT((apply_semigroup<double>(damped, 1.0, x) - ref).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(apply_semigroup<double>(damped, 1.0, Eigen::VectorXd::Zero(5)), Error);
}

TEST(ApplySemigroup, DissipativityAndBackwardGrowth) {
  std::mt19937_64 rng(3);
  const auto sys = build_wave_model<double>(8, 0.2).system;
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x = random_vec(16, rng);
    const double t = 0.3 * k;
    EXPECT_LE(wnorm(sys, apply_semigroup<double>(sys, t, x)), wnorm(sys, x) * (1 + 1e-12));
    EXPECT_LE(wnorm(sys, apply_semigroup<double>(sys, -t, x)), std::exp(sys.q_half_norm * t) * wnorm(sys, x) * (1 + 1e-12));
  }
}

TEST(ApplySemigroup, GroupPropertyOnStates) {
  std::mt19937_64 rng(4);
  const auto sys = build_wave_model<double>(5, 0.1).system;
  const Eigen::VectorXd x = random_vec(10, rng);
  const Eigen::VectorXd a = apply_semigroup<double>(sys, 1.2, apply_semigroup<double>(sys, 0.7, x));
  EXPECT_LT((a - apply_semigroup<double>(sys, 1.9, x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CorrectionOperator, ClosedFormAgainstProducts) {
  const auto skew = build_wave_model<double>(5, 0.0).system;
  const auto damped = build_wave_model<double>(5, 0.1).system;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(10, 10);
  EXPECT_LT((correction_operator<double>(skew, 2.3, CorrectionMode::kExact) - eye).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((correction_operator<double>(damped, 0.0, CorrectionMode::kExact) - eye).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd a_adj = damped.w_inv * damped.a_mat.transpose() * damped.w_mat;
  const Eigen::MatrixXd ref = oracle::expm(damped.a_mat * 0.7) * oracle::expm(a_adj * 0.7);
  EXPECT_LT((correction_operator<double>(damped, 0.7, CorrectionMode::kExact) - ref).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(correction_operator<double>(damped, 0.7, CorrectionMode::kIdentity), eye);
  EXPECT_LT((correction_operator<double>(damped, 0.7, CorrectionMode::kScalarDecay) - std::exp(-0.07) * eye)
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  EXPECT_DOUBLE_EQ(correction_scalar(0.1, 0.7, CorrectionMode::kIdentity), 1.0);
  EXPECT_DOUBLE_EQ(correction_scalar(0.1, 0.7, CorrectionMode::kScalarDecay), std::exp(-0.07));
}

TEST(CorrectionOperator, SelfAdjointWithBoundedSpectrum) {
  const auto sys = build_wave_model<double>(6, 0.2).system;
  const double q_norm = 2 * sys.q_half_norm;
  for (double t : {0.1, 0.9, 3.0, 6.0}) {
    const Eigen::MatrixXd p = correction_operator<double>(sys, t, CorrectionMode::kExact);
    const Eigen::MatrixXd wp = sys.w_mat * p;
    EXPECT_LT((wp - wp.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    // Generalized eigenvalues of (W P, W) are the W-spectrum of P.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig((wp + wp.transpose()) / 2, sys.w_mat);
    EXPECT_GE(eig.eigenvalues().minCoeff(), std::exp(-q_norm * t) - 1e-12);
    EXPECT_LE(eig.eigenvalues().maxCoeff(), 1 + 1e-12);
  }
}

TEST(TimeGrid, WeightsAndValidation) {
  const TimeGrid g(6.0, 600);
  EXPECT_DOUBLE_EQ(g.h(), 0.01);
  EXPECT_EQ(g.nodes(), 601);
  EXPECT_NEAR(g.weights().sum(), 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(g.weight(0), 0.005);
  EXPECT_DOUBLE_EQ(g.weight(600), 0.005);
  EXPECT_DOUBLE_EQ(g.time(600), 6.0);
  EXPECT_THROW(TimeGrid(6.0, 1), Error);
  EXPECT_THROW(TimeGrid(0.0, 10), Error);
  EXPECT_EQ(g.refined().n_steps(), 1200);
  EXPECT_THROW(l2_norm(g, Eigen::MatrixXd::Zero(2, 600)), Error);
}

TEST(SimulateTrajectory, FreeMotionIsThePureSemigroup) {
  std::mt19937_64 rng(5);
  const auto skew = build_wave_model<double>(4, 0.0).system;
  const auto damped = build_wave_model<double>(4, 0.1).system;
  const TimeGrid g(3.0, 120);
  const Eigen::VectorXd x0 = random_vec(8, rng);
  const Trajectory td = simulate_trajectory(damped, x0, LoadSpec::zero(), g);
  ASSERT_EQ(td.states.cols(), 121);
  for (Eigen::Index i = 0; i < g.nodes(); i += 17) {
    const Eigen::VectorXd ref = oracle::expm(damped.a_mat * g.time(i)) * x0;
    EXPECT_LT((td.states.col(i) - ref).cwiseAbs().maxCoeff(), 1e-11);
  }
  const Trajectory ts = simulate_trajectory(skew, x0, LoadSpec::zero(), g);
  for (Eigen::Index i = 0; i < g.nodes(); ++i) EXPECT_NEAR(wnorm(skew, ts.states.col(i)), wnorm(skew, x0), 1e-10);
}

TEST(SimulateTrajectory, SecondOrderWithLoad) {
  std::mt19937_64 rng(6);
  const auto sys = build_wave_model<double>(4, 0.1).system;
  const LoadSpec load = LoadSpec::modal_sinusoid(2, 0.8, 1.3);
  const Eigen::VectorXd x0 = random_vec(8, rng);
  const double t_final = 4.0;
  auto rhs = [&](double t, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return sys.a_mat * z + load.evaluate(t, 8);
  };
  const Eigen::VectorXd exact = oracle::rk4(rhs, x0, t_final, 20000);
  double prev = 0;
  for (int n : {50, 100, 200}) {
    const Trajectory tr = simulate_trajectory(sys, x0, load, TimeGrid(t_final, n));
    const double err = (tr.states.col(n) - exact).norm();
    if (prev > 0) {
      EXPECT_GT(prev / err, 3.5);
      EXPECT_LT(prev / err, 4.5);
    }
    prev = err;
  }
  // Self-convergence against an h/10 run.
  const Trajectory coarse = simulate_trajectory(sys, x0, load, TimeGrid(t_final, 100));
  const Trajectory coarse2 = simulate_trajectory(sys, x0, load, TimeGrid(t_final, 200));
  const Trajectory fine = simulate_trajectory(sys, x0, load, TimeGrid(t_final, 1000));
  const double e1 = (coarse.states.col(100) - fine.states.col(1000)).norm();
  const double e2 = (coarse2.states.col(200) - fine.states.col(1000)).norm();
  EXPECT_GT(e1 / e2, 3.0);
  EXPECT_LT(e1 / e2, 5.0);
}

TEST(SimulateTrajectory, InputNoiseIsSeeded) {
  const auto sys = build_wave_model<double>(3, 0.1).system;
  const TimeGrid g(2.0, 50);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(6);
  const Trajectory a = simulate_trajectory(sys, x0, LoadSpec::zero(), g, InputNoise{0.1, 9});
  const Trajectory b = simulate_trajectory(sys, x0, LoadSpec::zero(), g, InputNoise{0.1, 9});
  const Trajectory c = simulate_trajectory(sys, x0, LoadSpec::zero(), g);
  EXPECT_EQ(a.states, b.states);
  EXPECT_GT((a.states - c.states).norm(), 1e-3);
}

TEST(SynthesizeObservations, NoiselessDeterministicAndCalibrated) {
  const auto model = build_wave_model<double>(4, 0.0);
  const auto sys = build_observation(model, ObservationSpec<double>{0.0, std::numbers::pi / 2, 4, ObservedField::kVelocity});
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(8, -1, 1);
  const Trajectory tr = simulate_trajectory(sys, x0, LoadSpec::zero(), TimeGrid(6.0, 10000));
  const ObservationSeries clean = synthesize_observations(tr, sys, 0.0, 1);
  EXPECT_EQ(clean.samples, Eigen::MatrixXd(sys.c_mat * tr.states));

  const ObservationSeries a = synthesize_observations(tr, sys, 0.1, 42);
  const ObservationSeries b = synthesize_observations(tr, sys, 0.1, 42);
  EXPECT_EQ(std::memcmp(a.samples.data(), b.samples.data(), sizeof(double) * a.samples.size()), 0);
  EXPECT_EQ(a.noise_seed.value(), 42u);
  EXPECT_DOUBLE_EQ(a.noise_sigma, 0.1);

  const Eigen::MatrixXd noise = a.samples - clean.samples;
  for (Eigen::Index ch = 0; ch < noise.rows(); ++ch) {
    const double mean = noise.row(ch).mean();
    const double sd = std::sqrt((noise.row(ch).array() - mean).square().sum() / double(noise.cols() - 1));
    EXPECT_NEAR(sd, 0.1, 0.003) << "channel " << ch;
  }
}
