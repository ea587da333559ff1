#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "measures.hpp"
#include "rng.hpp"

namespace ppdiff {

/// Critical binary branching Brownian motion on the torus [−box, box)^d.
/// Particles live Exp(V) and then split in two or die with equal odds;
/// motion has generator Δ (increments of variance 2t per coordinate).
struct BranchingConfig {
  double rho = 1.0;
  double V = 1.0;
  int dim = 3;
  double T = 1.0;
  double box_halfwidth = 16.0;
  double inner_halfwidth = 8.0;

  void validate() const {
    if (!(rho > 0.0)) throw Error("intensity must be positive", "process.rho");
    if (!(V >= 0.0)) throw Error("branching rate must be non-negative", "process.V");
    if (dim < 3) throw Error("branching model needs dim >= 3 (transient motion)", "process.dim");
    if (!(T >= 0.0)) throw Error("time horizon must be non-negative", "process.T");
    if (!(inner_halfwidth > 0.0)) throw Error("inner window must be positive", "process.inner_halfwidth");
    if (inner_halfwidth + 3.0 * std::sqrt(4.0 * T) > box_halfwidth)
      throw Error("box too small: need inner + 3*sqrt(4T) <= box", "process.box_halfwidth");
  }
};

struct BranchingResult {
  WeightedPointSet inner;
  WeightedPointSet box;  ///< full torus configuration
  std::size_t box_count = 0;
  std::size_t initial_count = 0;
};

/// One realisation at time T. Lineages are followed depth first; survivors are
/// wrapped onto the torus and those in the inner cube are returned.
inline BranchingResult simulate_cbbm(const BranchingConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int d = cfg.dim;
  const double B = cfg.box_halfwidth;
  const double box_vol = std::pow(2.0 * B, d);
  const double mean0 = cfg.rho * box_vol;
  const std::size_t n0 = std::poisson_distribution<std::size_t>(mean0)(rng);
  const double guard = 100.0 * mean0 + 1000.0;

  BranchingResult res{WeightedPointSet(AveragingWindow::cube(cfg.inner_halfwidth, d)),
                      WeightedPointSet(AveragingWindow::cube(B, d)), 0, n0};
  std::exponential_distribution<double> life(cfg.V > 0.0 ? cfg.V : 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  struct Particle {
    Vec x;
    double t;
  };
  std::vector<Particle> stack;
  Vec y(static_cast<std::size_t>(d));

  auto move = [&](Vec& x, double dt) {
    const double s = std::sqrt(2.0 * dt);
    for (auto& c : x) c += s * normal(rng);
  };

  for (std::size_t i = 0; i < n0; ++i) {
    Vec x(static_cast<std::size_t>(d));
    for (auto& c : x) c = (2.0 * rng.uniform() - 1.0) * B;
    stack.push_back({std::move(x), 0.0});
    while (!stack.empty()) {
      Particle p = std::move(stack.back());
      stack.pop_back();
      const double tau = cfg.V > 0.0 ? life(rng) : std::numeric_limits<double>::infinity();
      if (p.t + tau >= cfg.T) {
        move(p.x, cfg.T - p.t);
        for (int c = 0; c < d; ++c) {
          double v = std::fmod(p.x[c] + B, 2.0 * B);
          if (v < 0.0) v += 2.0 * B;
          y[c] = v - B;
        }
        ++res.box_count;
        res.box.add_if_inside(y);
        res.inner.add_if_inside(y);
        continue;
      }
      move(p.x, tau);
      p.t += tau;
      if (rng.uniform() < 0.5) {
        stack.push_back(p);
        stack.push_back(std::move(p));
      }
      if (static_cast<double>(res.box_count + stack.size()) > guard)
        throw Error("simulate_cbbm: population exceeded 100x the initial mean");
    }
  }
  return res;
}

/// Density of the excess reduced second moment at distance r > 0 after time t:
/// f_t(r) = (V/2) ∫_0^{2t} (4πu)^{−d/2} exp(−r²/4u) du.
inline double cbbm_f(double V, int dim, double t, double r) {
  if (!(r > 0.0)) throw Error("cbbm_f: r must be positive");
  if (t <= 0.0 || V == 0.0) return 0.0;
  // u = r²/(4v²) turns the integrand into 2 v^{d−3} e^{−v²} on [r/√(8t), ∞),
  // which stays smooth however large t is
  const double dd = dim;
  const double v0 = r / std::sqrt(8.0 * t);
  auto integrand = [&](double v) { return 2.0 * std::pow(v, dd - 3.0) * std::exp(-v * v); };
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, v0, std::numeric_limits<double>::infinity(), 15, 1e-12);
  const double c = std::pow(r, 2.0 - dd) / (4.0 * std::pow(std::numbers::pi, dd / 2.0));
  return 0.5 * V * c * val;
}

/// Same quantity through the upper incomplete gamma function.
inline double cbbm_f_closed(double V, int dim, double t, double r) {
  if (t <= 0.0 || V == 0.0) return 0.0;
  const double a = dim / 2.0 - 1.0;
  const double c = std::pow(r, 2.0 - dim) / (4.0 * std::pow(std::numbers::pi, dim / 2.0));
  return 0.5 * V * c * boost::math::tgamma(a, r * r / (8.0 * t));
}

/// lim_{t→∞} f_t(r): the Green kernel (V/2)·Γ(d/2−1)/(4π^{d/2})·r^{2−d}.
inline double cbbm_f_infinity(double V, int dim, double r) {
  return 0.5 * V * std::tgamma(dim / 2.0 - 1.0) / (4.0 * std::pow(std::numbers::pi, dim / 2.0)) * std::pow(r, 2.0 - dim);
}

/// Equilibrium diffraction ρ²δ_0 + ρ(1 + (V/2)/((2π)^α |k|^α))λ; α = 2 is Brownian.
inline SpectralModel analytic_cbbm_model(double rho, double V, int dim, double alpha = 2.0) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw Error("stable index must lie in (0,2]", "process.alpha");
  if (!(dim > alpha)) throw Error("equilibrium needs dim > alpha", "process.dim");
  SpectralModel m;
  m.dim = dim;
  m.label = "branching equilibrium";
  m.atoms_within = [rho, dim](double) { return std::vector<Atom>{{Vec(static_cast<std::size_t>(dim), 0.0), rho * rho}}; };
  m.is_singular = [](std::span<const double> k, double tol) { return norm(k) <= tol; };
  m.density = [rho, V, alpha](std::span<const double> k) {
    const double kk = norm(k);
    return rho * (1.0 + 0.5 * V / std::pow(2.0 * std::numbers::pi * kk, alpha));
  };
  return m;
}

}  // namespace ppdiff
