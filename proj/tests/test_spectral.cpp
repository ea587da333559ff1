#include <gtest/gtest.h>

#include <numbers>

#include "ppdiff/clusters.hpp"
#include "ppdiff/processes.hpp"
#include "ppdiff/renewal.hpp"
#include "ppdiff/spectral.hpp"

using namespace ppdiff;
using std::numbers::pi;

namespace {

WeightedPointSet integer_segment(int n) {
  WeightedPointSet z(AveragingWindow::interval(-0.5, n - 0.5));
  for (int i = 0; i < n; ++i) z.add({static_cast<double>(i)});
  return z;
}

EmpiricalSpectrum run_spectrum(const std::function<WeightedPointSet(RngStream&)>& draw, const AveragingWindow& w,
                               int realisations, Vec origin, Vec step, std::size_t count, std::vector<Vec> atoms,
                               bool scan = false) {
  const auto plan = SpectrumPlan::make(w, std::move(origin), std::move(step), count, 4, scan, std::move(atoms));
  std::vector<SpectrumSample> samples;
  for (int r = 0; r < realisations; ++r) {
    RngStream rng(77, static_cast<std::uint32_t>(r), Purpose::centres);
    samples.push_back(sample_spectrum(draw(rng), plan));
  }
  return merge_spectrum(samples, plan, w);
}

}  // namespace

TEST(Periodogram, Examples) {
  const auto w = AveragingWindow::cube(5.0, 2);
  const std::vector<Vec> ks{{0.0, 0.0}, {0.3, -1.2}, {2.0, 7.0}};
  for (double v : periodogram(WeightedPointSet(w), ks)) EXPECT_EQ(v, 0.0);
  WeightedPointSet one(w);
  one.add({1.3, -2.2});
  for (double v : periodogram(one, ks)) EXPECT_NEAR(v, 1.0 / w.volume(), 1e-15);
  for (int n : {10, 100, 1000}) EXPECT_NEAR(periodogram(integer_segment(n), {{0.0}})[0], n, 1e-9 * n);
}

TEST(Periodogram, NonnegativeAndEven) {
  RngStream rng(1, 0, Purpose::test);
  const auto w = AveragingWindow::cube(4.0, 2);
  const auto ps = sample_centre(PoissonProcess{2.0, 2}, w, rng);
  std::vector<Vec> ks, mks;
  for (int i = 0; i < 50; ++i) {
    const double a = 4.0 * rng.uniform() - 2.0, b = 4.0 * rng.uniform() - 2.0;
    ks.push_back({a, b});
    mks.push_back({-a, -b});
  }
  const auto I = periodogram(ps, ks), J = periodogram(ps, mks);
  for (std::size_t q = 0; q < ks.size(); ++q) {
    EXPECT_GE(I[q], 0.0);
    EXPECT_NEAR(I[q], J[q], 1e-10 * std::max(1.0, I[q]));
  }
}

TEST(Periodogram, RayMatchesDirect) {
  RngStream rng(2, 0, Purpose::test);
  for (int d : {1, 2, 3}) {
    const auto w = AveragingWindow::cube(3.0, d);
    WeightedPointSet ps(w);
    Vec x(static_cast<std::size_t>(d));
    for (int i = 0; i < 40; ++i) {
      for (auto& c : x) c = (2.0 * rng.uniform() - 1.0) * 2.9;
      ps.add(x, cplx(rng.uniform(), rng.uniform() - 0.5));
    }
    KRay ray;
    ray.origin.assign(static_cast<std::size_t>(d), 0.1);
    ray.step.assign(static_cast<std::size_t>(d), 0.0);
    ray.step[0] = 0.37;
    ray.offset.assign(static_cast<std::size_t>(d), 0.0);
    ray.offset[0] = 1.0 / 6.0;
    ray.count = 11;
    ray.m_lo = -6;
    ray.m_hi = 6;
    const auto I = ray_periodogram(ps, ray);
    std::vector<Vec> ks;
    for (std::size_t j = 0; j < ray.count; ++j)
      for (int m = ray.m_lo; m <= ray.m_hi; ++m) {
        Vec k = ray.k(j);
        for (int c = 0; c < d; ++c) k[c] += m * ray.offset[c];
        ks.push_back(k);
      }
    const auto J = periodogram(ps, ks);
    ASSERT_EQ(I.size(), J.size());
    for (std::size_t q = 0; q < I.size(); ++q) EXPECT_NEAR(I[q], J[q], 1e-10) << d << " " << q;
  }
}

TEST(Bragg, IntegerCombIsExact) {
  const auto z = integer_segment(1000);
  const auto e = bragg_excess(z, {{0.0}, {1.0}, {-2.0}, {0.5}});
  EXPECT_NEAR(e[0], 1.0, 1e-9);
  EXPECT_NEAR(e[1], 1.0, 1e-9);
  EXPECT_NEAR(e[2], 1.0, 1e-9);
  EXPECT_NEAR(e[3], 0.0, 1e-9);
}

TEST(Bragg, PoissonWeights) {
  const auto w = AveragingWindow::interval(0.0, 2000.0);
  for (double rho : {1.0, 2.0}) {
    const auto emp = run_spectrum([&](RngStream& rng) { return sample_centre(PoissonProcess{rho, 1}, w, rng); }, w, 200,
                                  {0.1}, {0.1}, 10, {{0.0}, {0.5}});
    const auto [w0, se0] = bragg_weight(emp, std::vector<double>{0.0}, 1e-9);
    EXPECT_NEAR(w0, rho * rho, std::max(3.0 * se0, 0.03 * rho * rho));
    const auto [wh, seh] = bragg_weight(emp, std::vector<double>{0.5}, 1e-9);
    EXPECT_NEAR(wh, 0.0, 3.0 * seh);
    EXPECT_THROW(bragg_weight(emp, std::vector<double>{0.2}, 1e-3), Error);
  }
}

TEST(AcDensity, PoissonAndGamma) {
  const auto w = AveragingWindow::interval(0.0, 2000.0);
  const auto pois = run_spectrum([&](RngStream& rng) { return sample_centre(PoissonProcess{1.0, 1}, w, rng); }, w, 100,
                                 {0.0}, {0.5}, 5, {});
  const auto pmodel = analytic_centre_model(PoissonProcess{1.0, 1});
  const auto [v, se] = ac_density_estimate(pois, pmodel, std::vector<double>{1.0}, 3.0 / w.scale());
  EXPECT_NEAR(v, 1.0, 3.0 * se);
  EXPECT_THROW(ac_density_estimate(pois, pmodel, std::vector<double>{0.0}, 3.0 / w.scale()), Error);
  EXPECT_THROW(ac_density_estimate(pois, pmodel, std::vector<double>{0.7}, 3.0 / w.scale()), Error);

  const auto law = InterArrivalLaw::gamma(2.0);
  const auto gam = run_spectrum([&](RngStream& rng) { return simulate_renewal(law, 2000.0, rng); }, w, 100, {0.5}, {0.5}, 3,
                                {});
  const auto [g, gse] = ac_density_estimate(gam, analytic_renewal_model(law), std::vector<double>{1.0}, 3.0 / w.scale());
  EXPECT_NEAR(g, (2.0 + pi * pi) / (4.0 + pi * pi), 3.0 * gse);
  EXPECT_NEAR((2.0 + pi * pi) / (4.0 + pi * pi), 0.8558, 1e-4);
}

TEST(AcDensity, SignedPoissonFlat) {
  const auto w = AveragingWindow::interval(0.0, 2000.0);
  const auto emp = run_spectrum(
      [&](RngStream& rng) {
        const auto c = sample_centre(PoissonProcess{1.0, 1}, w, rng);
        return sample_compound(c, SignedBernoulli{0.5}, rng);
      },
      w, 100, {0.0}, {0.25}, 13, {{0.0}});
  for (std::size_t j = 0; j < emp.k_grid.size(); ++j)
    EXPECT_NEAR(emp.intensity_mean[j], 1.0, 4.0 * emp.intensity_stderr[j]) << emp.k_grid[j][0];
  EXPECT_NEAR(emp.atoms[0].weight, 0.0, 3.0 * emp.atoms[0].stderr_);
}

TEST(Autocorr, SinglePoint) {
  const auto w = AveragingWindow::cube(2.0, 2);
  WeightedPointSet one(w);
  one.add({0.5, 0.5});
  const auto h = empirical_autocorr(one, 0.5);
  EXPECT_NEAR(h.atom0, 1.0 / w.volume(), 1e-15);
  for (const auto& v : h.density) EXPECT_EQ(v, cplx(0.0));
}

TEST(Autocorr, IntegerSegmentEdgeFactor) {
  const int L = 100;
  const auto h = empirical_autocorr(integer_segment(L), 0.1);
  EXPECT_NEAR(h.atom0, 1.0, 1e-12);
  for (std::size_t q = 0; q < h.density.size(); ++q) {
    const double z = h.center(q)[0], r = std::round(z);
    const bool on = std::abs(z - r) < 1e-9 && r != 0.0 && std::abs(r) < L;
    EXPECT_NEAR(h.mass(q).real(), on ? (L - std::abs(r)) / L : 0.0, 1e-12) << z;
  }
}

TEST(Autocorr, HermitianBins) {
  RngStream rng(3, 0, Purpose::test);
  const auto w = AveragingWindow::cube(3.0, 2);
  WeightedPointSet ps(w);
  for (int i = 0; i < 60; ++i)
    ps.add({(2.0 * rng.uniform() - 1.0) * 2.9, (2.0 * rng.uniform() - 1.0) * 2.9}, cplx(rng.uniform() - 0.3, rng.uniform() - 0.6));
  const auto h = empirical_autocorr(ps, 0.25);
  EXPECT_GE(h.atom0, 0.0);
  for (std::size_t q = 0; q < h.density.size(); ++q) {
    EXPECT_NEAR(std::abs(h.density[h.mirror(q)] - std::conj(h.density[q])), 0.0, 1e-12);
    const auto zq = h.center(q), zm = h.center(h.mirror(q));
    EXPECT_NEAR(zq[0], -zm[0], 1e-12);
    EXPECT_NEAR(zq[1], -zm[1], 1e-12);
  }
}

TEST(Autocorr, MatchesBruteForcePairs) {
  RngStream rng(4, 0, Purpose::test);
  const auto w = AveragingWindow::interval(0.0, 30.0);
  const auto ps = sample_centre(PoissonProcess{1.0, 1}, w, rng);
  const double bw = 0.5;
  const auto h = empirical_autocorr(ps, bw, 6.0);
  std::map<long, double> brute;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j) {
      if (i == j) continue;
      const long b = std::lround((ps.point(i)[0] - ps.point(j)[0]) / bw);
      if (std::labs(b) <= h.half_bins) brute[b] += 1.0 / w.volume();
    }
  for (std::size_t q = 0; q < h.density.size(); ++q) {
    const long b = std::lround(h.center(q)[0] / bw);
    EXPECT_NEAR(h.mass(q).real(), brute.count(b) ? brute[b] : 0.0, 1e-12);
  }
  EXPECT_THROW(empirical_autocorr(ps, 0.0), Error);
}

TEST(Autocorr, PoissonFlat) {
  const auto w = AveragingWindow::interval(0.0, 1e4);
  std::vector<AcHistogram> hs;
  for (std::uint32_t r = 0; r < 100; ++r) {
    RngStream rng(5, r, Purpose::centres);
    hs.push_back(empirical_autocorr(sample_centre(PoissonProcess{1.0, 1}, w, rng), 0.1, 5.0));
  }
  const auto avg = average_histograms(hs);
  EXPECT_NEAR(avg.atom0, 1.0, 3.0 * avg.atom0_stderr);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t q = 0; q < avg.density.size(); ++q) {
    if (std::abs(avg.center(q)[0]) < 1e-9) continue;
    s += avg.density[q].real();
    ++n;
    EXPECT_NEAR(avg.density[q].real(), 1.0, 0.03 + 4.0 * avg.stderr_re[q]);
  }
  EXPECT_NEAR(s / static_cast<double>(n), 1.0, 0.01);
}

TEST(Palm, PoissonAndConsistencyWithNaive) {
  const auto w = AveragingWindow::interval(0.0, 1e4);
  std::vector<WeightedPointSet> reals;
  std::vector<AcHistogram> naive;
  double points = 0.0;
  for (std::uint32_t r = 0; r < 50; ++r) {
    RngStream rng(6, r, Purpose::centres);
    reals.push_back(sample_centre(PoissonProcess{1.5, 1}, w, rng));
    naive.push_back(empirical_autocorr(reals.back(), 0.1, 5.0));
    points += static_cast<double>(reals.back().size());
  }
  const auto palm = palm_first_moment(reals, 0.1, 5.0);
  const auto nv = average_histograms(naive);
  const double rho_hat = points / (50.0 * w.volume());
  EXPECT_EQ(palm.atom0, 1.0);
  // Palm bins stop where a whole bin still fits inside max_radius
  ASSERT_LE(palm.half_bins, nv.half_bins);
  double sp = 0.0, sn = 0.0;
  for (std::size_t q = 0; q < palm.density.size(); ++q) {
    if (std::abs(palm.center(q)[0]) < 1e-9) continue;
    const std::size_t qn = q + static_cast<std::size_t>(nv.half_bins - palm.half_bins);
    ASSERT_NEAR(nv.center(qn)[0], palm.center(q)[0], 1e-12);
    EXPECT_NEAR(palm.density[q].real(), 1.5, 0.05 * 1.5);
    sp += rho_hat * palm.density[q].real();
    sn += nv.density[qn].real();
  }
  EXPECT_NEAR(sp / sn, 1.0, 5e-3);
  EXPECT_NEAR(rho_hat * palm.atom0, nv.atom0, 1e-12);
}

TEST(Palm, GammaRenewalMatchesGAlpha) {
  const auto law = InterArrivalLaw::gamma(2.0);
  std::vector<WeightedPointSet> reals;
  for (std::uint32_t r = 0; r < 40; ++r) {
    RngStream rng(8, r, Purpose::renewal);
    reals.push_back(simulate_renewal(law, 1e4, rng));
  }
  const double bw = 0.1;
  const auto palm = palm_first_moment(reals, bw, 3.0);
  for (std::size_t q = 0; q < palm.density.size(); ++q) {
    const double z = std::abs(palm.center(q)[0]);
    if (z < 1e-9) continue;
    // bin average of 1 − e^{−4|x|} over [z − bw/2, z + bw/2]
    const double a = z - bw / 2, b = z + bw / 2;
    const double want = 1.0 - (std::exp(-4.0 * a) - std::exp(-4.0 * b)) / (4.0 * bw);
    EXPECT_NEAR(palm.density[q].real(), want, 4.0 * palm.stderr_re[q] + 1e-3) << z;
  }
}

TEST(Palm, Errors) {
  WeightedPointSet tiny(AveragingWindow::interval(0.0, 3.0));
  tiny.add({0.5});
  EXPECT_THROW(palm_first_moment({tiny}, 0.1, 2.0), Error);
  EXPECT_THROW(palm_first_moment({}, 0.1, 2.0), Error);
  EXPECT_THROW(palm_first_moment({tiny}, 0.5, 0.2), Error);
}

TEST(Radial, PoissonFlatBothCorrections) {
  const auto w = AveragingWindow::cube(10.0, 2);
  std::vector<RadialProfile> tr, pe;
  for (std::uint32_t r = 0; r < 100; ++r) {
    RngStream rng(9, r, Purpose::centres);
    const auto ps = sample_centre(PoissonProcess{2.0, 2}, w, rng);
    tr.push_back(radial_pair_density(ps, 0.25, 3.0, EdgeCorrection::translation));
    pe.push_back(radial_pair_density(ps, 0.25, 3.0, EdgeCorrection::periodic));
  }
  for (const auto& p : {average_profiles(tr), average_profiles(pe)})
    for (std::size_t b = 2; b < p.density.size(); ++b) EXPECT_NEAR(p.density[b], 4.0, 4.0 * p.stderr_[b]) << p.r_mid[b];
  WeightedPointSet ps(AveragingWindow::ball(1.0, 2));
  EXPECT_THROW(radial_pair_density(ps, 0.1, 0.5, EdgeCorrection::translation), Error);
}

TEST(Bartlett, Examples) {
  const auto p = bartlett(analytic_centre_model(PoissonProcess{1.7, 1}), 1.7);
  EXPECT_TRUE(p.atoms_within(10.0).empty());
  EXPECT_EQ(p.density(std::vector<double>{0.4}), 1.7);

  const auto z = bartlett(analytic_centre_model(LatticeProcess{1.0, 1}), 1.0);
  const auto atoms = z.atoms_within(3.0);
  EXPECT_EQ(atoms.size(), 6u);
  for (const auto& a : atoms) EXPECT_NE(a.k[0], 0.0);

  const auto law = InterArrivalLaw::gamma(3.0);
  const auto g = bartlett(analytic_renewal_model(law), 1.0);
  EXPECT_TRUE(g.atoms_within(5.0).empty());
  EXPECT_NEAR(g.density(std::vector<double>{0.6}), 1.0 - *h(law, 0.6), 1e-15);

  EXPECT_THROW(bartlett(analytic_centre_model(PoissonProcess{1.0, 1}), 1.5), Error);
}

TEST(Bartlett, InvertsAddingOriginAtom) {
  // signed Poisson has no atom at 0; add ρ²δ_0 and remove it again
  const auto base = compound_model(analytic_centre_model(PoissonProcess{1.0, 1}), 1.0, SignedBernoulli{0.5});
  SpectralModel with = base;
  with.atoms_within = [inner = base.atoms_within](double r) {
    auto a = inner(r);
    a.push_back({{0.0}, 0.49});
    return a;
  };
  const auto back = bartlett(with, 0.7);
  EXPECT_EQ(back.atoms_within(5.0).size(), base.atoms_within(5.0).size());
  EXPECT_EQ(back.density(std::vector<double>{0.3}), base.density(std::vector<double>{0.3}));
}

TEST(Compare, ModelAgainstItself) {
  const auto law = InterArrivalLaw::gamma(2.0);
  const auto model = analytic_renewal_model(law);
  EmpiricalSpectrum e;
  e.window_scale = 1000.0;
  e.window_volume = 2000.0;
  e.realisation_count = 1;
  for (int j = 1; j <= 50; ++j) {
    const Vec k{0.05 * j};
    e.k_grid.push_back(k);
    e.intensity_mean.push_back(model.density(k));
    e.intensity_stderr.push_back(0.01);
  }
  e.atoms.push_back({{0.0}, 1.0, 0.01});
  const Tolerances tol{{"density_mean_rel", 0.0}, {"density_l1_rel", 0.0}, {"density_linf_rel", 0.0}, {"atom_rel", 0.0}};
  const auto rep = compare(e, model, tol, ExclusionPolicy{3.0 / e.window_scale, 0.0, 2000.0});
  EXPECT_EQ(rep.compared_points, 50u);
  EXPECT_EQ(rep.density_mean_rel, 0.0);
  EXPECT_EQ(rep.density_l1_rel, 0.0);
  EXPECT_EQ(rep.density_linf_rel, 0.0);
  EXPECT_EQ(rep.atom_max_rel, 0.0);
  EXPECT_EQ(rep.checks.size(), 4u);
  EXPECT_TRUE(rep.pass());

  auto off = e;
  off.intensity_mean[7] *= 1.5;
  const auto bad = compare(off, model, tol, ExclusionPolicy{3.0 / e.window_scale, 0.0, 2000.0});
  EXPECT_FALSE(bad.pass());
  EXPECT_NEAR(bad.density_linf_rel, 0.5, 1e-12);
}

TEST(Compare, ExclusionAroundAtoms) {
  const auto model = analytic_centre_model(LatticeProcess{1.0, 1});
  const std::vector<Vec> grid{{0.999}, {0.9}, {1.0}, {2.0005}, {1.5}};
  const auto mask = exclusion_mask(grid, model, ExclusionPolicy{0.01, 0.0, 300.0});
  EXPECT_EQ(mask, (std::vector<bool>{true, false, true, true, false}));
  // sidelobe w/(π²Δ²L) at Δ = 0.1, L = 300 is 1/(π²·3) ≈ 0.034
  const auto leak = exclusion_mask({{0.9}}, model, ExclusionPolicy{0.01, 0.03, 300.0});
  EXPECT_TRUE(leak[0]);
  const auto no_leak = exclusion_mask({{0.9}}, model, ExclusionPolicy{0.01, 0.04, 300.0});
  EXPECT_FALSE(no_leak[0]);
}
