#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "charfun.hpp"
#include "clusters.hpp"
#include "processes.hpp"
#include "renewal.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace ppdiff {

struct SelftestCase {
  std::string name;
  double error;
  double tolerance;
  bool pass() const { return error <= tolerance; }
};

inline std::vector<SelftestCase> selftest_psf() {
  std::vector<SelftestCase> out;
  for (auto [d, b] : std::vector<std::pair<int, double>>{{1, 1.0}, {1, 2.0}, {1, 0.5}, {2, 1.0}, {2, 2.0}, {3, 1.5}})
    out.push_back({"theta d=" + std::to_string(d) + " b=" + std::to_string(b), gaussian_psf_check(d, b, 8.0 * std::max(b, 1.0 / b)), 1e-12});
  return out;
}

inline std::vector<SelftestCase> selftest_riesz(std::uint64_t seed = 7) {
  std::vector<SelftestCase> out;
  RngStream rng(seed, 0, Purpose::test);
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + static_cast<int>(rng.uniform() * 4.0);
    const double alpha = d * (0.05 + 0.9 * rng.uniform());
    Vec k(static_cast<std::size_t>(d));
    for (auto& c : k) c = 2.0 * rng.uniform() - 1.0;
    const double s = 0.1 + 10.0 * rng.uniform();
    Vec sk(k);
    for (auto& c : sk) c *= s;
    const double lhs = riesz_fourier(d, alpha, sk);
    const double rhs = std::pow(s, -alpha) * riesz_fourier(d, alpha, k);
    out.push_back({"homogeneity #" + std::to_string(t), std::abs(lhs - rhs) / std::abs(rhs), 1e-12});
  }
  for (int d = 1; d <= 4; ++d) {
    Vec k(static_cast<std::size_t>(d), 0.0);
    k[0] = 0.7;
    out.push_back({"self-dual alpha=d/2 d=" + std::to_string(d),
                   std::abs(riesz_fourier(d, 0.5 * d, k) - std::pow(0.7, -0.5 * d)), 1e-12});
  }
  const double k1[3] = {1.0, 0.0, 0.0};
  out.push_back({"d=3 alpha=2 constant 1/pi", std::abs(riesz_fourier(3, 2.0, k1) - 1.0 / std::numbers::pi), 1e-15});
  return out;
}

/// Models used by the δ_0-cluster identity.
inline std::vector<std::pair<std::string, SpectralModel>> identity_models() {
  std::vector<std::pair<std::string, SpectralModel>> m;
  m.emplace_back("poisson", analytic_centre_model(PoissonProcess{1.5, 1}));
  m.emplace_back("poisson d2", analytic_centre_model(PoissonProcess{0.7, 2}));
  m.emplace_back("lattice", analytic_centre_model(LatticeProcess{1.0, 1}));
  m.emplace_back("matern", analytic_centre_model(MaternProcess{1.0, 0.3, 2}));
  m.emplace_back("fibonacci", analytic_centre_model(
                                  FibonacciGas{(golden_ratio - 2.0) / 2.0, golden_ratio / 2.0,
                                               Profile::tent((golden_ratio - 2.0) / 2.0, golden_ratio / 2.0)},
                                  {4.0, 20.0}));
  m.emplace_back("renewal gamma", analytic_renewal_model(InterArrivalLaw::gamma(2.0)));
  m.emplace_back("renewal tiling", analytic_renewal_model(InterArrivalLaw::two_atom(Rational(2, 3), Rational(4, 3), Rational(1, 2))));
  return m;
}

inline std::vector<SelftestCase> selftest_identities(std::uint64_t seed = 11) {
  std::vector<SelftestCase> out;

  // Cluster δ_0 leaves every model unchanged.
  for (const auto& [name, model] : identity_models()) {
    const int d = model.dim;
    const ClusterLaw delta0 = DeterministicCluster{FiniteCluster{{{Vec(static_cast<std::size_t>(d), 0.0), 1.0}}}};
    // mass of the centre process enters only through the (E|Ψ̂|² − |EΨ̂|²) term, which vanishes here
    const auto c = compound_model(model, 1.0, delta0);
    double err = 0.0;
    const auto a0 = model.atoms_within(3.0), a1 = c.atoms_within(3.0);
    if (a0.size() != a1.size()) err = 1.0;
    for (std::size_t i = 0; i < std::min(a0.size(), a1.size()); ++i) err = std::max(err, std::abs(a0[i].weight - a1[i].weight));
    for (double t : {0.137, 0.61, 1.23, 2.71}) {
      Vec k(static_cast<std::size_t>(d), 0.0);
      k[0] = t;
      const double x = model.density(k), y = c.density(k);
      if (std::isfinite(x) || std::isfinite(y)) err = std::max(err, std::abs(x - y));
    }
    out.push_back({"delta0 cluster on " + name, err, 1e-10});
  }
  {
    // direct-space: δ_0 cluster on an atomic centre autocorrelation
    const std::vector<AcAtom> centre{{{0.0}, 1.0}, {{1.0}, 0.5}, {{-1.0}, 0.5}};
    const ClusterLaw delta0 = DeterministicCluster{FiniteCluster{{{{0.0}, 1.0}}}};
    const auto r = compound_autocorr_atoms(centre, delta0, 1.0, 1);
    double err = r.size() == centre.size() ? 0.0 : 1.0;
    for (const auto& a : centre) {
      cplx m = 0.0;
      for (const auto& b : r)
        if (std::abs(b.z[0] - a.z[0]) < 1e-12) m += b.mass;
      err = std::max(err, std::abs(m - a.mass));
    }
    out.push_back({"delta0 cluster on atomic autocorrelation", err, 1e-10});
  }

  // Periodogram equals the Fourier transform of the exact pair-difference measure.
  RngStream rng(seed, 0, Purpose::test);
  for (int t = 0; t < 10; ++t) {
    const int d = 1 + t % 3;
    const int n = 1 + static_cast<int>(rng.uniform() * 20.0);
    WeightedPointSet ps(AveragingWindow::cube(3.0, d));
    Vec x(static_cast<std::size_t>(d));
    for (int i = 0; i < n; ++i) {
      for (auto& c : x) c = (2.0 * rng.uniform() - 1.0) * 2.99;
      ps.add(x, cplx(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0));
    }
    std::vector<Vec> ks;
    for (int q = 0; q < 5; ++q) {
      Vec k(static_cast<std::size_t>(d));
      for (auto& c : k) c = 6.0 * rng.uniform() - 3.0;
      ks.push_back(k);
    }
    const auto I = periodogram(ps, ks);
    double err = 0.0;
    for (std::size_t q = 0; q < ks.size(); ++q) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t j = 0; j < ps.size(); ++j) {
          double ph = 0.0;
          for (int c = 0; c < d; ++c) ph += ks[q][c] * (ps.point(i)[c] - ps.point(j)[c]);
          s += ps.weight(i) * std::conj(ps.weight(j)) * std::polar(1.0, -2.0 * std::numbers::pi * ph);
        }
      err = std::max(err, std::abs(s.real() / ps.window().volume() - I[q]) + std::abs(s.imag()) / ps.window().volume());
    }
    out.push_back({"periodogram = FT of pair measure, n=" + std::to_string(n) + " d=" + std::to_string(d), err, 1e-10});
  }

  // Z-comb autocorrelation: bin mass at integer z is exactly 1 − |z|/L.
  {
    const int L = 100;
    WeightedPointSet z(AveragingWindow::interval(-0.5, L - 0.5));
    for (int i = 0; i < L; ++i) z.add({static_cast<double>(i)});
    const auto h = empirical_autocorr(z, 0.1);
    double err = std::abs(h.atom0 - 1.0);
    for (std::size_t q = 0; q < h.density.size(); ++q) {
      const double zc = h.center(q)[0];
      const double r = std::round(zc);
      double expect = 0.0;
      if (std::abs(zc - r) < 1e-9 && r != 0.0 && std::abs(r) < L) expect = 1.0 - std::abs(r) / L;
      err = std::max(err, std::abs(h.mass(q) - expect));
    }
    out.push_back({"Z-comb edge bias 1 - |z|/L", err, 1e-10});
  }
  return out;
}

}  // namespace ppdiff
