#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "ppdiff/processes.hpp"

using namespace ppdiff;
using std::numbers::pi;

namespace {

const double kTau = std::numbers::phi;

FibonacciGas tent_gas() {
  const double c = (kTau - 2.0) / 2.0, w = kTau / 2.0;
  return {c, w, Profile::tent(c, w)};
}

double min_pair_distance(const WeightedPointSet& ps) {
  double best = 1e300;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      double d2 = 0.0;
      for (int c = 0; c < ps.dim(); ++c) d2 += (ps.point(i)[c] - ps.point(j)[c]) * (ps.point(i)[c] - ps.point(j)[c]);
      best = std::min(best, d2);
    }
  return std::sqrt(best);
}

}  // namespace

TEST(Poisson, CountMeanAndVariance) {
  const auto w = AveragingWindow::cube(10.0, 2);
  const int n = 1000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < n; ++r) {
    RngStream rng(2, static_cast<std::uint32_t>(r), Purpose::centres);
    const auto ps = sample_centre(PoissonProcess{1.0, 2}, w, rng);
    for (std::size_t i = 0; i < ps.size(); ++i) ASSERT_TRUE(w.contains(ps.point(i)));
    const double c = static_cast<double>(ps.size());
    s += c;
    s2 += c * c;
  }
  const double mean = s / n, var = (s2 - n * mean * mean) / (n - 1);
  EXPECT_NEAR(mean, 400.0, 3.0 * std::sqrt(400.0 / n));
  EXPECT_NEAR(var, 400.0, 3.0 * std::sqrt((2.0 * 400.0 * 400.0 + 400.0) / n));
}

TEST(Poisson, BallWindowUniform) {
  // fraction of points in the inner half-radius ball is 2^{-d}
  const auto w = AveragingWindow::ball(5.0, 3);
  double inner = 0.0, total = 0.0;
  for (std::uint32_t r = 0; r < 50; ++r) {
    RngStream rng(4, r, Purpose::centres);
    const auto ps = sample_centre(PoissonProcess{2.0, 3}, w, rng);
    for (std::size_t i = 0; i < ps.size(); ++i) inner += norm(ps.point(i)) < 2.5;
    total += static_cast<double>(ps.size());
  }
  EXPECT_NEAR(inner / total, 0.125, 3.0 * std::sqrt(0.125 * 0.875 / total));
  EXPECT_NEAR(total / 50.0, 2.0 * w.volume(), 3.0 * std::sqrt(2.0 * w.volume() / 50.0));
}

TEST(Lattice, SampleAndModel) {
  RngStream rng(1, 0, Purpose::centres);
  const auto ps = sample_centre(LatticeProcess{0.5, 2}, AveragingWindow::cube(2.1, 2), rng);
  EXPECT_EQ(ps.size(), 81u);
  const auto shifted = sample_centre(LatticeProcess{1.0, 1, true}, AveragingWindow::interval(0.0, 100.0), rng);
  EXPECT_EQ(shifted.size(), 100u);

  const auto m = analytic_centre_model(LatticeProcess{1.0, 1});
  const auto atoms = m.atoms_within(3.0);
  ASSERT_EQ(atoms.size(), 7u);
  for (const auto& a : atoms) {
    EXPECT_EQ(a.k[0], std::round(a.k[0]));
    EXPECT_EQ(a.weight, 1.0);
  }
  EXPECT_EQ(m.density(std::vector<double>{0.3}), 0.0);
  // b = 1/2 in d = 2: density 4, atoms 16 on 2Z²
  const auto m2 = analytic_centre_model(LatticeProcess{0.5, 2});
  for (const auto& a : m2.atoms_within(2.0)) {
    EXPECT_EQ(a.weight, 16.0);
    EXPECT_EQ(std::fmod(a.k[0], 2.0), 0.0);
  }
  EXPECT_DOUBLE_EQ(process_intensity(LatticeProcess{0.5, 2}), 4.0);
}

TEST(Poisson, Model) {
  const auto m = analytic_centre_model(PoissonProcess{2.0, 1});
  const auto atoms = m.atoms_within(5.0);
  ASSERT_EQ(atoms.size(), 1u);
  EXPECT_EQ(atoms[0].k[0], 0.0);
  EXPECT_EQ(atoms[0].weight, 4.0);
  EXPECT_EQ(m.density(std::vector<double>{1.9}), 2.0);
}

TEST(Matern, MinDistanceAndDensity) {
  const MaternProcess mp{1.0, 0.5, 2};
  const double rho_eff = (1.0 - std::exp(-pi / 4.0)) / (pi / 4.0);
  EXPECT_NEAR(matern_effective_density(mp), rho_eff, 1e-15);
  EXPECT_NEAR(process_intensity(mp), rho_eff, 1e-15);
  const auto w = AveragingWindow::cube(10.0, 2);
  const int n = 200;
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    RngStream rng(6, static_cast<std::uint32_t>(r), Purpose::centres);
    const auto ps = sample_centre(mp, w, rng);
    EXPECT_GE(min_pair_distance(ps), 0.5);
    total += static_cast<double>(ps.size());
  }
  // hard-core counts are under-dispersed, so the Poisson bound is conservative
  const double mean = total / n;
  EXPECT_NEAR(mean / w.volume(), rho_eff, 3.0 * std::sqrt(rho_eff * w.volume() / n) / w.volume());
}

TEST(Matern, ThreeDimensional) {
  const MaternProcess mp{3.0, 0.3, 3};
  RngStream rng(6, 0, Purpose::centres);
  const auto ps = sample_centre(mp, AveragingWindow::cube(3.0, 3), rng);
  EXPECT_GT(ps.size(), 50u);
  EXPECT_GE(min_pair_distance(ps), 0.3);
}

TEST(Matern, ModelFeatures) {
  const MaternProcess mp{2.0, 0.4, 2};
  const auto m = analytic_centre_model(mp);
  EXPECT_FALSE(m.exact);
  const double rho_eff = matern_effective_density(mp);
  const auto atoms = m.atoms_within(1.0);
  ASSERT_EQ(atoms.size(), 1u);
  EXPECT_NEAR(atoms[0].weight, rho_eff * rho_eff, 1e-15);
  // far out the hole transform decays and the density approaches rho_eff
  EXPECT_NEAR(m.density(std::vector<double>{40.0, 0.0}), rho_eff, 1e-2 * rho_eff);
}

TEST(BallFourier, MatchesKnownCases) {
  // d = 1: FT of 1_{[-R,R]} is sin(2πkR)/(πk)
  for (double k : {0.1, 0.7, 2.3}) EXPECT_NEAR(ball_indicator_fourier(1, 0.8, k), std::sin(2.0 * pi * k * 0.8) / (pi * k), 1e-13);
  EXPECT_NEAR(ball_indicator_fourier(3, 2.0, 0.0), 4.0 / 3.0 * pi * 8.0, 1e-12);
  // d = 3 closed form: (sin u − u cos u)/(2π² k³), u = 2πkR
  for (double k : {0.2, 1.1}) {
    const double u = 2.0 * pi * k * 0.5;
    EXPECT_NEAR(ball_indicator_fourier(3, 0.5, k), (std::sin(u) - u * std::cos(u)) / (2.0 * pi * pi * k * k * k), 1e-13);
  }
}

TEST(Fibonacci, DensityByEnumeration) {
  FibonacciGas g{(kTau - 2.0) / 2.0, kTau / 2.0, Profile::constant()};
  EXPECT_NEAR(fibonacci_density(g), kTau / std::sqrt(5.0), 1e-15);
  const double L = 1e4;
  const auto pts = fibonacci_points(g.window_center, g.window_halfwidth, 0.0, L);
  EXPECT_NEAR(static_cast<double>(pts.size()) / L, kTau / std::sqrt(5.0), 1e-3);
  RngStream rng(1, 0, Purpose::occupation);
  const auto full = sample_centre(g, AveragingWindow::interval(0.0, L), rng);
  EXPECT_EQ(full.size(), pts.size());
}

TEST(Fibonacci, ModelSetIsDeloneWithTwoGaps) {
  FibonacciGas g{(kTau - 2.0) / 2.0, kTau / 2.0, Profile::constant()};
  const auto pts = fibonacci_points(g.window_center, g.window_halfwidth, -5000.0, 5000.0);
  ASSERT_GT(pts.size(), 1000u);
  std::size_t shorts = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double gap = pts[i].x - pts[i - 1].x;
    const bool is_short = std::abs(gap - 1.0) < 1e-9, is_long = std::abs(gap - kTau) < 1e-9;
    ASSERT_TRUE(is_short || is_long) << gap;
    shorts += is_short;
    // the star map lands in the window and x − x* ∈ √5 Z
    const double n = (pts[i].x - pts[i].x_star) / std::sqrt(5.0);
    EXPECT_NEAR(n, std::round(n), 1e-6);
    EXPECT_GE(pts[i].x_star, g.window_center - g.window_halfwidth);
    EXPECT_LT(pts[i].x_star, g.window_center + g.window_halfwidth);
  }
  // long/short frequency ratio τ
  EXPECT_NEAR(static_cast<double>(pts.size() - 1 - shorts) / static_cast<double>(shorts), kTau, 1e-2);
}

TEST(Fibonacci, ThinningKeepsProfileMean) {
  const auto g = tent_gas();
  EXPECT_NEAR(profile_moments(g).first, 0.5, 1e-10);
  EXPECT_NEAR(profile_moments(g).second, 0.5 - 1.0 / 3.0, 1e-10);
  double total = 0.0;
  const double L = 2e4;
  for (std::uint32_t r = 0; r < 10; ++r) {
    RngStream rng(7, r, Purpose::occupation);
    total += static_cast<double>(sample_centre(g, AveragingWindow::interval(0.0, L), rng).size());
  }
  EXPECT_NEAR(total / (10.0 * L), process_intensity(g), 5e-3);
}

TEST(Fibonacci, ModuleContainsDetectedPeaks) {
  const auto mod = fibonacci_module(2.0, 10.0);
  auto has = [&](double k) {
    return std::any_of(mod.begin(), mod.end(), [k](const ModulePoint& p) { return std::abs(p.k - k) < 1e-12; });
  };
  EXPECT_TRUE(has(0.0));
  EXPECT_TRUE(has(kTau / std::sqrt(5.0)));
  EXPECT_TRUE(has(1.0 / std::sqrt(5.0)));
  EXPECT_TRUE(has(-1.0 / std::sqrt(5.0)));
  for (const auto& p : mod) {
    // k + k* is an integer
    const double n1 = p.k + p.k_star;
    EXPECT_NEAR(n1, std::round(n1), 1e-9);
  }
}

TEST(Fibonacci, BraggWeightsMatchEnumeration) {
  const auto g = tent_gas();
  const auto model = analytic_centre_model(g, {4.0, 40.0});
  auto atoms = model.atoms_within(4.0);
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.weight > b.weight; });
  ASSERT_GE(atoms.size(), 5u);
  const double L = 1e5;
  const auto comb = fibonacci_weighted_comb(g, 0.0, L);
  for (int i = 0; i < 5; ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < comb.size(); ++j) s += comb.weight(j) * std::polar(1.0, -2.0 * pi * atoms[i].k[0] * comb.point(j)[0]);
    const double est = std::norm(s) / (L * L);
    EXPECT_NEAR(est, atoms[i].weight, 0.02 * atoms[i].weight) << "k=" << atoms[i].k[0];
  }
  // k = 0 atom is (dens · mean f)²
  const double dm = fibonacci_density(g) * profile_moments(g).first;
  EXPECT_NEAR(spectral_eval(model, std::vector<double>{0.0}, 1e-9).pp_weight, dm * dm, 1e-12);
  EXPECT_NEAR(model.density(std::vector<double>{0.3}), fibonacci_density(g) * profile_moments(g).second, 1e-12);
}
