#include <gtest/gtest.h>

#include <numbers>

#include "ppdiff/branching.hpp"

using namespace ppdiff;
using std::numbers::pi;

namespace {

BranchingConfig small_config() {
  BranchingConfig c;
  c.rho = 1.0;
  c.V = 2.0;
  c.dim = 3;
  c.T = 0.25;
  c.box_halfwidth = 5.0;
  c.inner_halfwidth = 1.5;
  return c;
}

}  // namespace

TEST(BranchingConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.dim = 2;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.box_halfwidth = 4.0;  // 1.5 + 3·√1 = 4.5 > 4
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.rho = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Cbbm, CountConservedAtCriticality) {
  const auto c = small_config();
  const double box_vol = std::pow(2.0 * c.box_halfwidth, 3);
  const int n = 1000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < n; ++r) {
    RngStream rng(12, static_cast<std::uint32_t>(r), Purpose::branching);
    const auto res = simulate_cbbm(c, rng);
    EXPECT_EQ(res.box.size(), res.box_count);
    for (std::size_t i = 0; i < res.inner.size(); ++i) ASSERT_TRUE(res.inner.window().contains(res.inner.point(i)));
    const double x = static_cast<double>(res.box_count);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, var = (s2 - n * mean * mean) / (n - 1);
  EXPECT_NEAR(mean, c.rho * box_vol, 3.0 * std::sqrt(var / n));
  // Var = ρ·vol·(1 + V T) for binary critical branching from a Poisson start
  EXPECT_NEAR(var / (c.rho * box_vol), 1.0 + c.V * c.T, 0.25);
}

TEST(Cbbm, NoBranchingOrNoTimeKeepsCount) {
  auto c = small_config();
  c.V = 0.0;
  for (std::uint32_t r = 0; r < 20; ++r) {
    RngStream rng(3, r, Purpose::branching);
    const auto res = simulate_cbbm(c, rng);
    EXPECT_EQ(res.box_count, res.initial_count);
  }
  c = small_config();
  c.T = 0.0;
  for (std::uint32_t r = 0; r < 20; ++r) {
    RngStream a(4, r, Purpose::branching), b(4, r, Purpose::branching);
    const auto res = simulate_cbbm(c, a);
    EXPECT_EQ(res.box_count, res.initial_count);
    // replay the stream: Poisson count, then per particle a uniform position,
    // one lifetime draw and a zero-length Brownian step
    const std::size_t n0 = std::poisson_distribution<std::size_t>(std::pow(2.0 * c.box_halfwidth, 3))(b);
    std::exponential_distribution<double> life(c.V);
    std::normal_distribution<double> normal(0.0, 1.0);
    ASSERT_EQ(res.box.size(), n0);
    for (std::size_t i = 0; i < n0; ++i) {
      double x[3];
      for (double& v : x) v = (2.0 * b.uniform() - 1.0) * c.box_halfwidth;
      life(b);
      for (int d = 0; d < 3; ++d) normal(b);
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(res.box.point(i)[d], x[d], 1e-12);
    }
  }
}

TEST(CbbmF, GreenLimitInThreeDimensions) {
  for (double r : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(cbbm_f_infinity(2.0, 3, r), 1.0 / (4.0 * pi * r), 1e-15);
    EXPECT_NEAR(cbbm_f_infinity(0.7, 3, r), 0.35 / (4.0 * pi * r), 1e-15);
    EXPECT_NEAR(cbbm_f(2.0, 3, 1e7, r), cbbm_f_infinity(2.0, 3, r), 1e-3 * cbbm_f_infinity(2.0, 3, r));
  }
}

TEST(CbbmF, BelowLimitAndMonotone) {
  for (int d : {3, 4, 5})
    for (double r : {0.2, 1.0, 2.0}) {
      double prev = 0.0;
      for (double t : {0.1, 0.5, 1.0, 4.0, 16.0, 100.0}) {
        const double f = cbbm_f(2.0, d, t, r);
        EXPECT_GT(f, prev) << d << " " << r << " " << t;
        EXPECT_LT(f, cbbm_f_infinity(2.0, d, r));
        prev = f;
      }
    }
}

TEST(CbbmF, RiemannSumOracle) {
  // d = 3, V = 2, r = 1, t = 10: midpoint sum of (4πu)^{−3/2} e^{−1/(4u)} over (0, 20)
  const int n = 4000000;
  const double h = 20.0 / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) * h;
    s += std::pow(4.0 * pi * u, -1.5) * std::exp(-1.0 / (4.0 * u));
  }
  EXPECT_NEAR(cbbm_f(2.0, 3, 10.0, 1.0), s * h, 1e-6);
}

TEST(CbbmF, ClosedFormAgrees) {
  for (int d : {3, 4, 6})
    for (double t : {0.2, 4.0, 50.0})
      for (double r : {0.2, 0.9, 2.0}) {
        const double q = cbbm_f(1.3, d, t, r);
        EXPECT_NEAR(cbbm_f_closed(1.3, d, t, r), q, 1e-8 * q) << d << " " << t << " " << r;
      }
  EXPECT_EQ(cbbm_f(0.0, 3, 1.0, 1.0), 0.0);
  EXPECT_EQ(cbbm_f(1.0, 3, 0.0, 1.0), 0.0);
  EXPECT_THROW(cbbm_f(1.0, 3, 1.0, 0.0), Error);
}

TEST(CbbmModel, Examples) {
  const auto m = analytic_cbbm_model(1.0, 2.0, 3);
  EXPECT_NEAR(m.density(std::vector<double>{1.0, 0.0, 0.0}), 1.0 + 1.0 / (4.0 * pi * pi), 1e-14);
  EXPECT_NEAR(m.density(std::vector<double>{0.0, 0.6, 0.8}), 1.02533, 1e-5);
  const auto atoms = m.atoms_within(1.0);
  ASSERT_EQ(atoms.size(), 1u);
  EXPECT_EQ(atoms[0].weight, 1.0);
  EXPECT_TRUE(m.is_singular(std::vector<double>{0.0, 0.0, 0.0}, 1e-9));

  const auto poisson = analytic_cbbm_model(1.7, 0.0, 3);
  for (double k : {0.01, 0.5, 3.0}) EXPECT_DOUBLE_EQ(poisson.density(std::vector<double>{k, 0.0, 0.0}), 1.7);
  EXPECT_DOUBLE_EQ(poisson.atoms_within(1.0)[0].weight, 1.7 * 1.7);

  const auto stable = analytic_cbbm_model(1.5, 0.8, 3, 1.0);
  EXPECT_NEAR(stable.density(std::vector<double>{1.0 / (2.0 * pi), 0.0, 0.0}), 1.5 * 1.4, 1e-14);

  EXPECT_THROW(analytic_cbbm_model(1.0, 1.0, 2, 2.0), Error);
  EXPECT_THROW(analytic_cbbm_model(1.0, 1.0, 3, 2.5), Error);
  EXPECT_NO_THROW(analytic_cbbm_model(1.0, 1.0, 2, 1.5));
}

TEST(CbbmModel, RieszConstantMatchesGreenKernel) {
  // FT of f_∞ = (V/2)/(4π|x|) is (V/2)/(4π²|k|²)
  const double V = 2.0;
  for (double k : {0.3, 1.0, 2.2}) {
    const double via_riesz = 0.5 * V / (4.0 * pi) * (1.0 / pi) * std::pow(k, -2.0);
    EXPECT_NEAR(analytic_cbbm_model(1.0, V, 3).density(std::vector<double>{k, 0.0, 0.0}) - 1.0, via_riesz, 1e-14);
  }
}
