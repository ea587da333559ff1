#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "measures.hpp"
#include "rng.hpp"

namespace ppdiff {

struct GaussianDisplacement {
  double sigma;
};
struct UniformDisplacement {
  double a;  ///< each coordinate uniform on (−a, a)
};
using Displacement = std::variant<GaussianDisplacement, UniformDisplacement>;

/// ν̂(k) for the displacement law.
inline double displacement_fourier(const Displacement& nu, std::span<const double> k) {
  if (const auto* g = std::get_if<GaussianDisplacement>(&nu)) {
    return std::exp(-2.0 * std::numbers::pi * std::numbers::pi * g->sigma * g->sigma * norm2(k));
  }
  const double a = std::get<UniformDisplacement>(nu).a;
  double v = 1.0;
  for (double c : k) {
    const double x = 2.0 * std::numbers::pi * a * c;
    v *= x == 0.0 ? 1.0 : std::sin(x) / x;
  }
  return v;
}

inline Vec sample_displacement(const Displacement& nu, int dim, RngStream& rng) {
  Vec x(static_cast<std::size_t>(dim));
  if (const auto* g = std::get_if<GaussianDisplacement>(&nu)) {
    std::normal_distribution<double> normal(0.0, g->sigma);
    for (auto& c : x) c = normal(rng);
  } else {
    const double a = std::get<UniformDisplacement>(nu).a;
    for (auto& c : x) c = (2.0 * rng.uniform() - 1.0) * a;
  }
  return x;
}

inline double displacement_reach(const Displacement& nu, int dim) {
  if (const auto* g = std::get_if<GaussianDisplacement>(&nu)) return 8.0 * g->sigma;
  return std::get<UniformDisplacement>(nu).a * std::sqrt(static_cast<double>(dim));
}

// ---------------------------------------------------------------------------

struct DeterministicCluster {
  FiniteCluster shape;
};

/// A single point at the centre carrying a random weight H from a finite table.
struct RandomWeight {
  std::vector<cplx> values;
  std::vector<double> probs;

  static RandomWeight bernoulli(double p) { return {{1.0, 0.0}, {p, 1.0 - p}}; }
};

struct RandomDisplacement {
  Displacement law;
};

/// K ~ table on {0, …, K_max} points, each displaced independently by ν.
struct NeymanScott {
  std::vector<double> k_probs;
  Displacement law;
};

/// A single point with weight +1 (probability p) or −1.
struct SignedBernoulli {
  double p;
};

using ClusterLaw = std::variant<DeterministicCluster, RandomWeight, RandomDisplacement, NeymanScott, SignedBernoulli>;

inline void validate_cluster_law(const ClusterLaw& law) {
  auto check_probs = [](const std::vector<double>& ps, const char* field) {
    double s = 0.0;
    for (double p : ps) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error("probabilities must lie in [0,1]", field);
      s += p;
    }
    if (ps.empty() || std::abs(s - 1.0) > 1e-12) throw Error("probabilities must sum to 1", field);
  };
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RandomWeight>) {
          if (v.values.size() != v.probs.size()) throw Error("values and probabilities differ in length", "cluster.probs");
          check_probs(v.probs, "cluster.probs");
        } else if constexpr (std::is_same_v<T, NeymanScott>) {
          check_probs(v.k_probs, "cluster.k_probs");
        } else if constexpr (std::is_same_v<T, SignedBernoulli>) {
          if (!(v.p >= 0.0 && v.p <= 1.0)) throw Error("probability must lie in [0,1]", "cluster.p");
        } else if constexpr (std::is_same_v<T, DeterministicCluster>) {
          for (const auto& pt : v.shape.points)
            if (!std::isfinite(pt.weight.real()) || !std::isfinite(pt.weight.imag()))
              throw Error("cluster weights must be finite", "cluster.points");
        }
      },
      law);
}

/// True when every realisation has real weights (the regime allowed on random centres).
inline bool cluster_is_real(const ClusterLaw& law) {
  if (const auto* d = std::get_if<DeterministicCluster>(&law)) {
    for (const auto& p : d->shape.points)
      if (p.weight.imag() != 0.0) return false;
  }
  if (const auto* r = std::get_if<RandomWeight>(&law)) {
    for (const auto& v : r->values)
      if (v.imag() != 0.0) return false;
  }
  return true;
}

/// E_Q Ψ̂(k)
inline cplx mean_ft(const ClusterLaw& law, std::span<const double> k) {
  return std::visit(
      [&](const auto& v) -> cplx {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DeterministicCluster>) {
          return v.shape.fourier(k);
        } else if constexpr (std::is_same_v<T, RandomWeight>) {
          cplx s = 0.0;
          for (std::size_t i = 0; i < v.values.size(); ++i) s += v.probs[i] * v.values[i];
          return s;
        } else if constexpr (std::is_same_v<T, RandomDisplacement>) {
          return displacement_fourier(v.law, k);
        } else if constexpr (std::is_same_v<T, NeymanScott>) {
          double m = 0.0;
          for (std::size_t n = 0; n < v.k_probs.size(); ++n) m += static_cast<double>(n) * v.k_probs[n];
          return m * displacement_fourier(v.law, k);
        } else {
          return 2.0 * v.p - 1.0;
        }
      },
      law);
}

/// E_Q |Ψ̂(k)|²
inline double second_ft(const ClusterLaw& law, std::span<const double> k) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DeterministicCluster>) {
          return std::norm(v.shape.fourier(k));
        } else if constexpr (std::is_same_v<T, RandomWeight>) {
          double s = 0.0;
          for (std::size_t i = 0; i < v.values.size(); ++i) s += v.probs[i] * std::norm(v.values[i]);
          return s;
        } else if constexpr (std::is_same_v<T, RandomDisplacement>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, NeymanScott>) {
          double m = 0.0, m2 = 0.0;
          for (std::size_t n = 0; n < v.k_probs.size(); ++n) {
            m += static_cast<double>(n) * v.k_probs[n];
            m2 += static_cast<double>(n * n) * v.k_probs[n];
          }
          const double nu = displacement_fourier(v.law, k);
          return m + (m2 - m) * nu * nu;
        } else {
          return 1.0;
        }
      },
      law);
}

/// Mean total mass m = E_Q Ψ̂(0).
inline cplx total_mean_mass(const ClusterLaw& law, int dim) {
  const Vec zero(static_cast<std::size_t>(dim), 0.0);
  return mean_ft(law, zero);
}

/// Radius containing every cluster offset (8σ for Gaussian displacements).
inline double cluster_reach(const ClusterLaw& law, int dim) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DeterministicCluster>) {
          double r = 0.0;
          for (const auto& p : v.shape.points) r = std::max(r, norm(p.offset));
          return r;
        } else if constexpr (std::is_same_v<T, RandomDisplacement> || std::is_same_v<T, NeymanScott>) {
          return displacement_reach(v.law, dim);
        } else {
          return 0.0;
        }
      },
      law);
}

inline FiniteCluster sample_cluster(const ClusterLaw& law, int dim, RngStream& rng) {
  const Vec origin(static_cast<std::size_t>(dim), 0.0);
  return std::visit(
      [&](const auto& v) -> FiniteCluster {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DeterministicCluster>) {
          return v.shape;
        } else if constexpr (std::is_same_v<T, RandomWeight>) {
          const double u = rng.uniform();
          double acc = 0.0;
          std::size_t pick = v.values.size() - 1;
          for (std::size_t i = 0; i < v.values.size(); ++i) {
            acc += v.probs[i];
            if (u < acc) {
              pick = i;
              break;
            }
          }
          return FiniteCluster{{{origin, v.values[pick]}}};
        } else if constexpr (std::is_same_v<T, RandomDisplacement>) {
          return FiniteCluster{{{sample_displacement(v.law, dim, rng), 1.0}}};
        } else if constexpr (std::is_same_v<T, NeymanScott>) {
          const double u = rng.uniform();
          double acc = 0.0;
          std::size_t count = v.k_probs.size() - 1;
          for (std::size_t n = 0; n < v.k_probs.size(); ++n) {
            acc += v.k_probs[n];
            if (u < acc) {
              count = n;
              break;
            }
          }
          FiniteCluster c;
          for (std::size_t n = 0; n < count; ++n) c.points.push_back({sample_displacement(v.law, dim, rng), 1.0});
          return c;
        } else {
          return FiniteCluster{{{origin, rng.uniform() < v.p ? 1.0 : -1.0}}};
        }
      },
      law);
}

/// Ξ = Σ_x T_x Ψ_x with independent cluster draws per centre, in centre order.
/// Points outside `out_window` (default: the centre window) and zero-weight
/// points are dropped.
inline WeightedPointSet sample_compound(const WeightedPointSet& centres, const ClusterLaw& law, RngStream& rng,
                                        std::optional<AveragingWindow> out_window = std::nullopt) {
  const int d = centres.dim();
  WeightedPointSet out(out_window ? *out_window : centres.window());
  if (out.dim() != d) throw Error("sample_compound: output window dimension mismatch");
  out.reserve(centres.size());
  Vec y(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < centres.size(); ++i) {
    if (centres.weight(i) != cplx(1.0)) throw Error("sample_compound: centre weights must be 1");
    const auto x = centres.point(i);
    for (const auto& p : sample_cluster(law, d, rng).points) {
      if (p.weight == cplx(0.0)) continue;
      for (int c = 0; c < d; ++c) y[c] = x[c] + p.offset[c];
      out.add_if_inside(y, p.weight);
    }
  }
  return out;
}

enum class CentreKind {
  random_process,     ///< stationary random centres: signed/real clusters only
  deterministic_comb  ///< fixed FLC comb: complex clusters allowed
};

/// |E Ψ̂|²·γ̂_P + ρ(E|Ψ̂|² − |E Ψ̂|²)λ
inline SpectralModel compound_model(const SpectralModel& centre, double rho, const ClusterLaw& law,
                                    CentreKind kind = CentreKind::random_process) {
  validate_cluster_law(law);
  if (kind == CentreKind::random_process && !cluster_is_real(law))
    throw Error("compound_model: complex cluster weights need a deterministic comb centre");
  SpectralModel m = centre;
  m.label = centre.label + " + cluster";
  auto centre_atoms = centre.atoms_within;
  m.atoms_within = [centre_atoms, law](double r) {
    std::vector<Atom> out;
    for (auto a : centre_atoms(r)) {
      a.weight *= std::norm(mean_ft(law, a.k));
      if (a.weight != 0.0) out.push_back(std::move(a));
    }
    return out;
  };
  auto centre_density = centre.density;
  m.density = [centre_density, law, rho](std::span<const double> k) {
    const double mean2 = std::norm(mean_ft(law, k));
    return mean2 * centre_density(k) + rho * (second_ft(law, k) - mean2);
  };
  return m;
}

// ---------------------------------------------------------------------------
// Direct-space (atomic) compound autocorrelation
// ---------------------------------------------------------------------------

struct AcAtom {
  Vec z;
  cplx mass;
};

namespace detail {

inline void merge_atom(std::vector<AcAtom>& atoms, const Vec& z, cplx mass) {
  for (auto& a : atoms) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) d2 += (a.z[i] - z[i]) * (a.z[i] - z[i]);
    if (d2 <= 1e-24) {
      a.mass += mass;
      return;
    }
  }
  atoms.push_back({z, mass});
}

/// μ ∗ ν̃ for atomic measures: atoms at s − t with mass w_s·conj(w_t).
inline std::vector<AcAtom> convolve_reflected(const std::vector<AcAtom>& mu, const std::vector<AcAtom>& nu) {
  std::vector<AcAtom> out;
  for (const auto& a : mu)
    for (const auto& b : nu) {
      Vec z(a.z.size());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = a.z[i] - b.z[i];
      merge_atom(out, z, a.mass * std::conj(b.mass));
    }
  return out;
}

inline std::vector<AcAtom> convolve(const std::vector<AcAtom>& mu, const std::vector<AcAtom>& nu) {
  std::vector<AcAtom> out;
  for (const auto& a : mu)
    for (const auto& b : nu) {
      Vec z(a.z.size());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = a.z[i] + b.z[i];
      merge_atom(out, z, a.mass * b.mass);
    }
  return out;
}

}  // namespace detail

/// γ_R = (EΨ ∗ (EΨ)~) ∗ γ_P + ρ(E(Ψ ∗ Ψ~) − EΨ ∗ (EΨ)~) for atomic centre
/// autocorrelations and atomic cluster laws.
inline std::vector<AcAtom> compound_autocorr_atoms(const std::vector<AcAtom>& centre_ac, const ClusterLaw& law,
                                                   double rho, int dim) {
  validate_cluster_law(law);
  const Vec origin(static_cast<std::size_t>(dim), 0.0);
  std::vector<AcAtom> mean_psi, second;
  if (const auto* d = std::get_if<DeterministicCluster>(&law)) {
    for (const auto& p : d->shape.points) detail::merge_atom(mean_psi, p.offset, p.weight);
    second = detail::convolve_reflected(mean_psi, mean_psi);
  } else if (std::holds_alternative<RandomWeight>(law) || std::holds_alternative<SignedBernoulli>(law)) {
    mean_psi.push_back({origin, mean_ft(law, origin)});
    second.push_back({origin, second_ft(law, origin)});
  } else {
    throw Error("compound_autocorr_atoms: cluster law is not atomic");
  }
  const auto mean_corr = detail::convolve_reflected(mean_psi, mean_psi);
  auto out = detail::convolve(mean_corr, centre_ac);
  for (const auto& a : second) detail::merge_atom(out, a.z, rho * a.mass);
  for (const auto& a : mean_corr) detail::merge_atom(out, a.z, -rho * a.mass);
  std::erase_if(out, [](const AcAtom& a) { return std::abs(a.mass) < 1e-15; });
  return out;
}

}  // namespace ppdiff
