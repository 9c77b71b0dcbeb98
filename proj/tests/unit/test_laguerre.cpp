#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "lagdelay/error.hpp"
#include "lagdelay/laguerre.hpp"
#include "oracles.hpp"

using namespace lagdelay;

TEST(AssocLaguerre, LowOrdersMatchHandExpansion) {
  const double xi = 0.7;
  EXPECT_DOUBLE_EQ(assoc_laguerre_poly(0, xi), 1.0);
  EXPECT_DOUBLE_EQ(assoc_laguerre_poly(1, xi), -xi);
  EXPECT_NEAR(assoc_laguerre_poly(2, xi), -xi + xi * xi / 2.0, 1e-15);
  EXPECT_NEAR(assoc_laguerre_poly(3, xi), -xi + xi * xi - xi * xi * xi / 6.0, 1e-15);
}

TEST(AssocLaguerre, VanishesAtZeroForPositiveOrder) {
  for (int m = 1; m <= 30; ++m) EXPECT_EQ(assoc_laguerre_poly(m, 0.0), 0.0) << m;
}

TEST(AssocLaguerre, RecurrenceMatchesHighPrecisionSum) {
  for (int m = 0; m <= 30; ++m) {
    for (double xi = 0.0; xi <= 50.0; xi += 0.37) {
      const double ref = oracle::assoc_laguerre_mp(m, xi);
      EXPECT_NEAR(assoc_laguerre_poly(m, xi), ref, 1e-9 * std::max(1.0, std::abs(ref)))
          << "m=" << m << " xi=" << xi;
    }
  }
}

TEST(AssocLaguerre, DifferenceOfOrdinaryLaguerre) {
  // L_m^{(-1)} = Lag_m - Lag_{m-1}.
  for (int m = 1; m <= 20; ++m)
    for (double xi : {0.01, 0.5, 3.0, 11.0}) {
      const double ref = boost::math::laguerre(m, xi) - boost::math::laguerre(m - 1, xi);
      EXPECT_NEAR(assoc_laguerre_poly(m, xi), ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST(AssocLaguerre, SequenceAgreesWithScalar) {
  const auto seq = assoc_laguerre_sequence(25, 4.2);
  ASSERT_EQ(seq.size(), 25u);
  for (int m = 0; m < 25; ++m)
    EXPECT_NEAR(seq[m], assoc_laguerre_poly(m, 4.2), 1e-10 * std::max(1.0, std::abs(seq[m])));
}

TEST(AssocLaguerre, RejectsNegativeOrder) {
  EXPECT_THROW(assoc_laguerre_poly(-1, 1.0), Error);
}

TEST(Basis, ClosedFormMatchesBoostLaguerre) {
  for (double p : {1.0, 20.0, 50.0}) {
    const BasisConfig cfg{p, 10};
    for (int j = 0; j < 10; ++j)
      for (double x : {0.0, 0.1, 1.0, 5.0, 20.0}) {
        const double t = x / p;
        const double ref = oracle::laguerre_fn(p, j, t);
        EXPECT_NEAR(eval_basis_time(cfg, j, t), ref, 1e-12 * std::sqrt(2.0 * p));
      }
  }
}

TEST(Basis, ValueAtZeroIsSqrt2pForEveryIndex) {
  const double p = 37.0;
  std::vector<double> out(9);
  eval_basis_all(p, 0.0, out);
  for (double v : out) EXPECT_DOUBLE_EQ(v, std::sqrt(2.0 * p));
  EXPECT_EQ(BasisConfig::sign_convention, "inverse-laplace");
}

TEST(Basis, ZeroBeforeOrigin) {
  std::vector<double> out(4, 1.0);
  eval_basis_all(5.0, -1e-9, out);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Basis, LaplaceTransformMatchesDefinition) {
  // int_0^inf l_k(t) e^{-st} dt = sqrt(2p)/(s+p) ((s-p)/(s+p))^k
  boost::math::quadrature::exp_sinh<double> integrator;
  const double p = 3.0;
  const BasisConfig cfg{p, 6};
  for (int k = 0; k < 6; ++k)
    for (double s : {0.5, 2.0, 7.0}) {
      const double num = integrator.integrate([&](double t) {
        return t > 200.0 ? 0.0 : eval_basis_time(cfg, k, t) * std::exp(-s * t);
      });
      const double ref = std::sqrt(2.0 * p) / (s + p) * std::pow((s - p) / (s + p), k);
      EXPECT_NEAR(num, ref, 1e-9) << "k=" << k << " s=" << s;
    }
}

TEST(Basis, OrthonormalByQuadrature) {
  const double p = 4.0;
  const BasisConfig cfg{p, 8};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j <= i; ++j) {
      const double g = oracle::integrate(
          [&](double t) { return eval_basis_time(cfg, i, t) * eval_basis_time(cfg, j, t); }, 0.0,
          100.0 / p, 200);
      EXPECT_NEAR(g, i == j ? 1.0 : 0.0, 1e-10) << i << "," << j;
    }
}

TEST(Basis, DerivativeMatchesCentralDifference) {
  const double p = 20.0;
  const int count = 7;
  std::vector<double> d(count), lo(count), hi(count);
  for (double t : {0.003, 0.05, 0.2}) {
    const double h = 1e-6;
    eval_basis_derivative_all(p, t, d);
    eval_basis_all(p, t - h, lo);
    eval_basis_all(p, t + h, hi);
    for (int j = 0; j < count; ++j) {
      const double fd = (hi[j] - lo[j]) / (2.0 * h);
      EXPECT_NEAR(d[j], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(StateSpace, StructureOfContinuousRealization) {
  const auto real = build_continuous_ss({2.5, 4});
  ASSERT_EQ(real.a.rows(), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(real.b(i), std::sqrt(5.0));
    for (int j = 0; j < 4; ++j) {
      const double expected = i == j ? -2.5 : (j < i ? -5.0 : 0.0);
      EXPECT_DOUBLE_EQ(real.a(i, j), expected);
    }
  }
}

TEST(StateSpace, ScalarDiscretizationIsExponential) {
  const auto disc = discretize_impulse_invariant(build_continuous_ss({7.0, 1}), 0.01);
  EXPECT_NEAR(disc.a(0, 0), std::exp(-0.07), 1e-15);
  EXPECT_NEAR(disc.b(0), std::exp(-0.07) * std::sqrt(14.0), 1e-14);
}

TEST(StateSpace, ZeroStepIsIdentity) {
  const auto disc = discretize_impulse_invariant(build_continuous_ss({3.0, 5}), 0.0);
  EXPECT_TRUE(disc.a.isApprox(Eigen::MatrixXd::Identity(5, 5), 1e-15));
  EXPECT_THROW(discretize_impulse_invariant(build_continuous_ss({3.0, 5}), -1.0), Error);
}

TEST(SampledBasis, RowsAreSampledClosedForms) {
  const BasisConfig cfg{20.0, 7};
  const double delta = 1e-4;
  const auto phi = build_phi(cfg, delta, 3000);
  for (int j = 0; j < 7; ++j) {
    const double scale = phi.matrix().col(j).cwiseAbs().maxCoeff();
    for (int n = 0; n < 3000; n += 7)
      EXPECT_NEAR(phi.matrix()(n, j), oracle::laguerre_fn(20.0, j, n * delta), 1e-9 * scale);
  }
}

TEST(SampledBasis, GramApproachesIdentityAsDeltaShrinks) {
  const BasisConfig cfg{20.0, 7};
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {1e-3, 1e-4, 1e-5}) {
    const int n = static_cast<int>(std::lround(2.0 / delta)) + 1;
    const auto phi = build_phi(cfg, delta, n);
    const Eigen::MatrixXd gram = delta * phi.matrix().transpose() * phi.matrix();
    const double err = (gram - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(SampledBasis, LeastSquaresRecoversSpanMembers) {
  const BasisConfig cfg{30.0, 6};
  const auto phi = build_phi(cfg, 2e-4, 2000);
  Eigen::VectorXd y(6);
  y << 0.4, -1.0, 0.25, 0.0, 2.0, -0.3;
  const Eigen::VectorXd z = phi.matrix() * y;
  EXPECT_TRUE(phi.solve_least_squares(z).isApprox(y, 1e-10));
  const Eigen::MatrixXd r_inv = phi.r_inverse();
  const Eigen::MatrixXd cov = r_inv * r_inv.transpose();
  const Eigen::MatrixXd ref = (phi.matrix().transpose() * phi.matrix()).inverse();
  EXPECT_TRUE(cov.isApprox(ref, 1e-8));
}

TEST(SampledBasis, FlagsIllConditioning) {
  // A slow basis sampled over a short window is nearly rank deficient.
  const auto phi = build_phi({1.0, 13}, 3e-4, 1667);
  EXPECT_TRUE(phi.ill_conditioned());
  EXPECT_GT(phi.cond(), kDefaultCondThreshold);
  const auto good = build_phi({50.0, 13}, 3e-4, 1667);
  EXPECT_FALSE(good.ill_conditioned());
}

TEST(SampledBasis, RejectsBadArguments) {
  EXPECT_THROW(build_phi({-1.0, 3}, 1e-3, 100), Error);
  EXPECT_THROW(build_phi({1.0, 0}, 1e-3, 100), Error);
  EXPECT_THROW(build_phi({1.0, 3}, 0.0, 100), Error);
  EXPECT_THROW(build_phi({1.0, 3}, 1e-3, 2), Error);
}

TEST(SampledBasis, PropertyRowsFollowStateRecursion) {
  // Phi_{n+1} = A_d Phi_n for random p and delta.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_p(0.0, 5.0), log_d(-5.0, -2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = std::exp(log_p(rng));
    const double delta = std::pow(10.0, log_d(rng));
    const BasisConfig cfg{p, 5};
    const auto phi = build_phi(cfg, delta, 50, 1e300);
    const auto disc = discretize_impulse_invariant(build_continuous_ss(cfg), delta);
    for (int n = 0; n + 1 < 50; ++n) {
      const Eigen::VectorXd next = disc.a * phi.matrix().row(n).transpose();
      EXPECT_TRUE(next.isApprox(phi.matrix().row(n + 1).transpose(), 1e-10) ||
                  (next - phi.matrix().row(n + 1).transpose()).norm() < 1e-12 * std::sqrt(p));
    }
  }
}
