#pragma once

#include <cmath>
#include <random>

#include "charfun.hpp"
#include "measures.hpp"
#include "rng.hpp"

namespace ppdiff {

/// One inter-arrival draw from ϱ.
inline double sample_gap(const InterArrivalLaw& law, RngStream& rng) {
  switch (law.kind()) {
    case InterArrivalLaw::Kind::exponential:
      return std::exponential_distribution<double>(1.0)(rng);
    case InterArrivalLaw::Kind::gamma:
      return std::gamma_distribution<double>(law.alpha(), 1.0 / law.alpha())(rng);
    case InterArrivalLaw::Kind::deterministic:
      return 1.0;
    default: {
      const double u = rng.uniform();
      double acc = 0.0;
      for (std::size_t i = 0; i < law.atoms().size(); ++i) {
        acc += law.probs()[i];
        if (u < acc) return law.atoms()[i];
      }
      return law.atoms().back();
    }
  }
}

/// Delay to the first point of the stationary process: density 1 − F(x).
///
/// Drawn as U·X̃ with U uniform and X̃ from the size-biased law x·dϱ(x)
/// (mean one, so no normalisation). For the gamma family X̃ is
/// Gamma(α+1, rate α); for atomic laws atom i has probability p_i a_i.
inline double sample_equilibrium_delay(const InterArrivalLaw& law, RngStream& rng) {
  double biased = 0.0;
  switch (law.kind()) {
    case InterArrivalLaw::Kind::exponential:
    case InterArrivalLaw::Kind::gamma:
      biased = std::gamma_distribution<double>(law.alpha() + 1.0, 1.0 / law.alpha())(rng);
      break;
    default: {
      const double u = rng.uniform();
      double acc = 0.0;
      biased = law.atoms().back();
      for (std::size_t i = 0; i < law.atoms().size(); ++i) {
        acc += law.probs()[i] * law.atoms()[i];
        if (u < acc) {
          biased = law.atoms()[i];
          break;
        }
      }
    }
  }
  return rng.uniform() * biased;
}

/// Stationary renewal process with law ϱ on the open interval (0, length), unit weights.
inline WeightedPointSet simulate_renewal(const InterArrivalLaw& law, double length, RngStream& rng) {
  if (!(length > 0.0)) throw Error("simulate_renewal: length must be positive");
  WeightedPointSet ps(AveragingWindow::interval(0.0, length));
  ps.reserve(static_cast<std::size_t>(length * 1.1) + 16);
  double x = sample_equilibrium_delay(law, rng);
  while (x < length) {
    const double p[1] = {x};
    ps.add_if_inside(p);
    x += sample_gap(law, rng);
  }
  return ps;
}

/// Diffraction of the stationary renewal process: δ_0 + (1 − h)λ for
/// non-lattice laws; δ_{Z/b} + (1 − h)λ when supp(ϱ) ⊂ bZ.
inline SpectralModel analytic_renewal_model(const InterArrivalLaw& law) {
  SpectralModel m;
  m.dim = 1;
  m.label = "renewal " + law.name();
  const auto b = lattice_classification(law);
  if (b) {
    const double spacing = 1.0 / *b;
    m.atoms_within = lattice_atoms(spacing, 1, 1.0);
    m.is_singular = [spacing](std::span<const double> k, double tol) { return near_lattice(k, spacing, tol); };
  } else {
    m.atoms_within = [](double) { return std::vector<Atom>{{{0.0}, 1.0}}; };
    m.is_singular = [](std::span<const double> k, double tol) { return std::abs(k[0]) <= tol; };
  }
  m.density = [law](std::span<const double> k) {
    const auto hv = h(law, k[0]);
    return hv ? 1.0 - *hv : std::numeric_limits<double>::quiet_NaN();
  };
  return m;
}

struct RenewalAcValue {
  double value;
  /// True when `value` is the ν-mass of an atom at x rather than a density.
  bool atomic;
};

/// Off-origin part of the autocorrelation γ = δ_0 + ν + ν̃ at x ≠ 0.
inline RenewalAcValue analytic_renewal_ac_density(const InterArrivalLaw& law, double x) {
  if (x == 0.0) throw Error("analytic_renewal_ac_density: x must be nonzero");
  const double z = std::abs(x);
  switch (law.kind()) {
    case InterArrivalLaw::Kind::exponential:
      return {1.0, false};
    case InterArrivalLaw::Kind::gamma:
      return {g_alpha(law.alpha(), z), false};
    default: {
      double amin = law.atoms().front();
      for (double a : law.atoms()) amin = std::min(amin, a);
      const int n = static_cast<int>(std::ceil(z / amin)) + 1;
      double mass = 0.0;
      for (const auto& [pos, w] : nu_atoms(law, n, z + 1e-9))
        if (std::abs(pos - z) <= 1e-9) mass += w;
      return {mass, true};
    }
  }
}

}  // namespace ppdiff
