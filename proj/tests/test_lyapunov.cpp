#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kslyap/ks_models.hpp"
#include "kslyap/lyapunov.hpp"
#include "kslyap/oracle_systems.hpp"
#include "test_support.hpp"

using namespace kslyap;
using kslyap::testing::gram_schmidt_r;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  const Vector v = sample_normal_vector(static_cast<std::size_t>(n * m), seed);
  return Eigen::Map<const Matrix>(v.data(), n, m);
}

}  // namespace

TEST(BurnIn, ZeroTransientIsIdentity) {
  const auto sys = make_lorenz();
  const Vector u0 = sys.sample_initial(1);
  EXPECT_EQ(burn_in(sys, u0, 0.0, {0.01, Scheme::RK4}), u0);
}

TEST(BurnIn, ExponentialDecay) {
  const auto sys = make_diagonal_linear({-1.0});
  const Vector u = burn_in(sys, Vector::Ones(1), 5.0, {0.01, Scheme::RK4});
  EXPECT_NEAR(u[0], std::exp(-5.0), 1e-7);
  EXPECT_THROW(burn_in(sys, Vector::Ones(1), -1.0, {0.01, Scheme::RK4}), InvalidArgument);
}

TEST(BurnIn, PeriodicL100AttractorAmplitude) {
  DomainSpec spec;
  spec.L = 100;
  const auto ks = make_ks(spec);
  const Vector u = burn_in(ks.system, ks.system.sample_initial(0), 2000.0, {});
  ASSERT_TRUE(u.allFinite());
  const auto f = physical_field(ks, u);
  double ss = 0;
  for (double v : f.u) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(f.u.size()));
  EXPECT_GE(rms, 0.5);
  EXPECT_LE(rms, 3.0);
}

TEST(PropagateFrame, ZeroFieldGivesFrame) {
  System s;
  s.dim = 3;
  s.rhs = [](double, const Vector& u, Vector& out) { out.setZero(u.size()); };
  Matrix Q = Matrix::Identity(3, 2);
  const auto step = propagate_frame(s, Vector::Ones(3), Q, 1.0, 1e-6, {0.1, Scheme::RK4});
  EXPECT_LT((step.V - Q).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PropagateFrame, LinearFlowMap) {
  const auto sys = make_diagonal_linear({1.0, -1.0});
  const auto step = propagate_frame(sys, Vector::Zero(2), Matrix::Identity(2, 2), 1.0, 1e-6, {0.01, Scheme::RK4});
  EXPECT_NEAR(step.V(0, 0) / std::exp(1.0), 1.0, 1e-5);
  EXPECT_NEAR(step.V(1, 1) / std::exp(-1.0), 1.0, 1e-5);
  EXPECT_NEAR(step.V(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(step.V(0, 1), 0.0, 1e-12);
}

TEST(PropagateFrame, ScalarDecay) {
  const auto sys = make_diagonal_linear({-1.0});
  const auto step = propagate_frame(sys, Vector::Ones(1), Matrix::Identity(1, 1), 2.0, 1e-6, {0.01, Scheme::RK4});
  EXPECT_NEAR(step.V(0, 0), std::exp(-2.0), 1e-5);
}

TEST(PropagateFrame, RejectsNonOrthonormalFrame) {
  const auto sys = make_diagonal_linear({-1.0, -2.0});
  Matrix Q = Matrix::Identity(2, 2);
  Q(0, 1) = 1e-6;
  EXPECT_THROW(propagate_frame(sys, Vector::Zero(2), Q, 1.0, 1e-6, {0.01, Scheme::RK4}), InvalidArgument);
}

TEST(PropagateFrame, ThreadedMatchesSequential) {
  DomainSpec spec;
  spec.L = 22;
  const auto ks = make_ks(spec);
  const Integrator integ(ks.system, {});
  const Vector u = integrate(ks.system, ks.system.sample_initial(0), 0.0, 100.0, {});
  const Matrix Q = Matrix::Identity(static_cast<Eigen::Index>(ks.dim()), 8);
  const auto a = propagate_frame(integ, u, Q, 0.0, 2.0, 1e-6, 1);
  const auto b = propagate_frame(integ, u, Q, 0.0, 2.0, 1e-6, 4);
  EXPECT_EQ(a.u_next, b.u_next);
  EXPECT_EQ(a.V, b.V);
}

TEST(Reorthonormalize, OrthonormalInput) {
  Matrix Q0;
  gram_schmidt_r(random_matrix(5, 3, 1), &Q0);
  const auto qr = reorthonormalize(Q0);
  EXPECT_LT((qr.Q - Q0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((qr.r_diag - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reorthonormalize, DiagonalCase) {
  Matrix V = Matrix::Zero(3, 2);
  V(0, 0) = 2;
  V(2, 1) = 3;
  const auto qr = reorthonormalize(V);
  EXPECT_NEAR(qr.r_diag[0], 2.0, 1e-15);
  EXPECT_NEAR(qr.r_diag[1], 3.0, 1e-15);
  Matrix axes = Matrix::Zero(3, 2);
  axes(0, 0) = 1;
  axes(2, 1) = 1;
  EXPECT_LT((qr.Q - axes).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reorthonormalize, MatchesGramSchmidtOracle) {
  const Matrix V = random_matrix(6, 4, 7);
  const auto qr = reorthonormalize(V);
  const Matrix R = gram_schmidt_r(V);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(qr.r_diag[i], R(i, i), 1e-10 * R(i, i));
}

TEST(Reorthonormalize, PropertiesOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(seed % 20);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(n));
    const Matrix V = random_matrix(n, m, seed) * std::pow(10.0, static_cast<double>(seed % 7) - 3.0);
    const auto qr = reorthonormalize(V);
    EXPECT_LT((qr.Q.transpose() * qr.Q - Matrix::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((qr.r_diag.array() > 0).all());
    EXPECT_LT((qr.Q * qr.R - V).norm(), 1e-10 * V.norm());
    EXPECT_EQ(Matrix(qr.R.triangularView<Eigen::StrictlyLower>()), Matrix::Zero(m, m));
  }
}

TEST(Reorthonormalize, RankDeficient) {
  Matrix V = Matrix::Zero(4, 2);
  V(0, 0) = 1;
  EXPECT_THROW(reorthonormalize(V), RankDeficient);
  V(1, 1) = NAN;
  EXPECT_THROW(reorthonormalize(V), NonFiniteColumn);
}

TEST(Spectrum, DiagonalLinearOracle) {
  LyapunovConfig cfg;
  cfg.m = 3;
  cfg.tau = 0;
  cfg.T = 1;
  cfg.N = 50;
  cfg.integrator = {0.05, Scheme::ETDRK4};
  const auto res = compute_spectrum(make_diagonal_linear({0.3, -0.1, -2.0}), cfg);
  EXPECT_NEAR(res.exponents[0], 0.3, 1e-3);
  EXPECT_NEAR(res.exponents[1], -0.1, 1e-3);
  EXPECT_NEAR(res.exponents[2], -2.0, 1e-3);
}

TEST(Spectrum, DiagonalLinearAllSizes) {
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<double> rates;
    for (std::size_t i = 0; i < n; ++i) rates.push_back(0.4 - 0.35 * static_cast<double>(i));
    // shuffled so the sort is exercised
    std::reverse(rates.begin(), rates.end());
    for (std::size_t m = 1; m <= n; ++m) {
      LyapunovConfig cfg;
      cfg.m = m;
      cfg.tau = 0;
      cfg.T = 1;
      cfg.N = 60;
      cfg.integrator = {0.05, Scheme::RK4};
      const auto res = compute_spectrum(make_diagonal_linear(rates), cfg);
      // the identity frame selects the first m coordinates
      std::vector<double> want(rates.begin(), rates.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(want.begin(), want.end(), std::greater<>());
      for (std::size_t i = 0; i < m; ++i)
        EXPECT_NEAR(res.exponents[static_cast<Eigen::Index>(i)], want[i], 1e-3) << n << " " << m;
    }
  }
}

TEST(Spectrum, LorenzOracle) {
  LyapunovConfig cfg;
  cfg.m = 3;
  cfg.tau = 100;
  cfg.T = 0.5;
  cfg.N = 2000;
  cfg.integrator = {0.01, Scheme::RK4};
  const auto res = compute_spectrum(make_lorenz(), cfg);
  EXPECT_NEAR(res.exponents.sum(), -(10.0 + 1.0 + 8.0 / 3.0), 0.15);
  EXPECT_NEAR(res.exponents[1], 0.0, 0.02);
  EXPECT_GT(res.exponents[0], 0.8);
}

TEST(Spectrum, HistoryReconstructionAndSorting) {
  DomainSpec spec;
  spec.L = 22;
  const auto ks = make_ks(spec);
  LyapunovConfig cfg;
  cfg.m = 8;
  cfg.tau = 100;
  cfg.N = 100;
  const auto res = compute_spectrum(ks.system, cfg);
  ASSERT_EQ(res.log_r_history.rows(), 100);
  ASSERT_EQ(res.log_r_history.cols(), 8);
  EXPECT_TRUE(res.log_r_history.allFinite());
  for (Eigen::Index i = 1; i < res.exponents.size(); ++i) EXPECT_GE(res.exponents[i - 1], res.exponents[i]);
  const Vector again = exponents_from_history(res.log_r_history, cfg.T);
  EXPECT_LT((again - res.exponents).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(res.exponents[0], 0.15);
  EXPECT_EQ(static_cast<std::size_t>(res.final_state.size()), ks.dim());
}

TEST(Spectrum, DeterministicAndThreadIndependent) {
  DomainSpec spec;
  spec.L = 22;
  const auto ks = make_ks(spec);
  LyapunovConfig cfg;
  cfg.m = 6;
  cfg.tau = 50;
  cfg.N = 20;
  const auto a = compute_spectrum(ks.system, cfg);
  cfg.threads = 3;
  const auto b = compute_spectrum(ks.system, cfg);
  EXPECT_EQ(a.exponents, b.exponents);
  EXPECT_EQ(a.log_r_history, b.log_r_history);
}

TEST(Spectrum, LeadingExponentsIndependentOfM) {
  DomainSpec spec;
  spec.L = 22;
  const auto ks = make_ks(spec);
  LyapunovConfig cfg;
  cfg.tau = 50;
  cfg.N = 30;
  cfg.m = 4;
  const auto a = compute_spectrum(ks.system, cfg);
  cfg.m = 10;
  const auto b = compute_spectrum(ks.system, cfg);
  // QR column j depends only on the first j columns
  EXPECT_LT((a.log_r_history - b.log_r_history.leftCols(4)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Spectrum, ValidatesConfig) {
  const auto sys = make_lorenz();
  LyapunovConfig cfg;
  cfg.integrator = {0.01, Scheme::RK4};
  cfg.m = 4;
  EXPECT_THROW(compute_spectrum(sys, cfg), InvalidArgument);
  cfg.m = 3;
  cfg.T = 0;
  EXPECT_THROW(compute_spectrum(sys, cfg), InvalidArgument);
  cfg.T = 1;
  cfg.N = 0;
  EXPECT_THROW(compute_spectrum(sys, cfg), InvalidArgument);
  cfg.N = 1;
  cfg.epsilon = 0;
  EXPECT_THROW(compute_spectrum(sys, cfg), InvalidArgument);
}

TEST(Spectrum, FailureReportsInterval) {
  // unbounded growth trips the blow-up guard inside the accumulation
  const auto sys = make_diagonal_linear({5.0});
  LyapunovConfig cfg;
  cfg.m = 1;
  cfg.tau = 0;
  cfg.T = 1;
  cfg.N = 10;
  cfg.integrator = {0.05, Scheme::ETDRK4};
  Vector u0 = Vector::Ones(1);
  EXPECT_THROW(compute_spectrum(sys, u0, cfg), IntegrationBlowUp);
}

TEST(Spectrum, RankDeficiencyCarriesIntervalIndex) {
  // rates so negative that R underflows on the first interval
  const auto sys = make_diagonal_linear({-400.0, -800.0});
  LyapunovConfig cfg;
  cfg.m = 2;
  cfg.tau = 0;
  cfg.T = 2;
  cfg.N = 3;
  cfg.epsilon = 1e-6;
  cfg.integrator = {0.05, Scheme::ETDRK4};
  try {
    compute_spectrum(sys, cfg);
    FAIL() << "expected rank deficiency";
  } catch (const RankDeficient& e) {
    EXPECT_EQ(e.interval(), 1u);
  }
}

TEST(IntervalScan, LinearFlowIsIndependentOfT) {
  LyapunovConfig cfg;
  cfg.m = 2;
  cfg.tau = 0;
  cfg.N = 40;
  cfg.integrator = {0.05, Scheme::ETDRK4};
  const auto rows = scan_reorthonormalization_interval(make_diagonal_linear({0.3, -0.1}), cfg, {0.5, 1, 2, 4});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.exponents.has_value());
    EXPECT_NEAR((*r.exponents)[0], 0.3, 1e-3);
    EXPECT_NEAR((*r.exponents)[1], -0.1, 1e-3);
  }
}

TEST(IntervalScan, FailuresBecomeMissingRows) {
  LyapunovConfig cfg;
  cfg.m = 2;
  cfg.tau = 0;
  cfg.N = 2;
  cfg.integrator = {0.05, Scheme::ETDRK4};
  const auto rows = scan_reorthonormalization_interval(make_diagonal_linear({-0.1, -300.0}), cfg, {0.5, 4});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].exponents.has_value());
  EXPECT_FALSE(rows[1].exponents.has_value());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_THROW(scan_reorthonormalization_interval(make_diagonal_linear({-0.1}), cfg, {2, 1}), InvalidArgument);
}
