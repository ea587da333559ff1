#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "measures.hpp"
#include "rng.hpp"

namespace ppdiff {

inline constexpr double golden_ratio = std::numbers::phi;
inline constexpr double sqrt5 = 2.2360679774997896964;

struct PoissonProcess {
  double rho;
  int dim;
};

/// The comb on b·Z^d (+ a uniform random offset when `random_offset`).
struct LatticeProcess {
  double b;
  int dim;
  bool random_offset = false;
};

/// Matérn hard-core thinning of a Poisson(rho) field with hard-core radius R.
struct MaternProcess {
  double rho;
  double R;
  int dim;
};

/// Occupation profile on the internal window.
struct Profile {
  std::string name;
  std::function<double(double)> f;
  /// Kink location, used to split quadratures (NaN if none).
  double kink = std::numeric_limits<double>::quiet_NaN();

  static Profile constant(double value = 1.0) {
    return {"constant", [value](double) { return value; }};
  }
  /// 1 at `center`, falling linearly to 0 at center ± half_width.
  static Profile tent(double center, double half_width) {
    return {"tent", [center, half_width](double y) { return std::max(0.0, 1.0 - std::abs(y - center) / half_width); },
            center};
  }
};

/// Fibonacci model set Λ = {m + nτ : m + nτ' ∈ W}, W = [c − w, c + w),
/// with each point kept independently with probability f(x*).
struct FibonacciGas {
  double window_center;
  double window_halfwidth;
  Profile profile;
};

using CentreProcess = std::variant<PoissonProcess, LatticeProcess, MaternProcess, FibonacciGas>;

inline int process_dim(const CentreProcess& p) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FibonacciGas>) {
          return 1;
        } else {
          return v.dim;
        }
      },
      p);
}

inline double matern_effective_density(const MaternProcess& m) {
  const double vb = unit_ball_volume(m.dim) * std::pow(m.R, m.dim);
  return -std::expm1(-m.rho * vb) / vb;
}

// ---------------------------------------------------------------------------
// Fibonacci model set helpers
// ---------------------------------------------------------------------------

struct ModelSetPoint {
  double x;
  double x_star;
};

/// Points of the Fibonacci model set with window [w_center ± w_half) inside the open interval (lo, hi).
inline std::vector<ModelSetPoint> fibonacci_points(double w_center, double w_half, double lo, double hi) {
  const double tau = golden_ratio;
  const double tau_conj = 1.0 - tau;
  const double w_lo = w_center - w_half, w_hi = w_center + w_half;
  std::vector<ModelSetPoint> out;
  // x − x* = n√5
  const auto n_lo = static_cast<long>(std::floor((lo - w_hi) / sqrt5)) - 1;
  const auto n_hi = static_cast<long>(std::ceil((hi - w_lo) / sqrt5)) + 1;
  for (long n = n_lo; n <= n_hi; ++n) {
    const double shift = static_cast<double>(n) * tau_conj;
    const auto m_lo = static_cast<long>(std::ceil(w_lo - shift)) - 1;
    const auto m_hi = static_cast<long>(std::floor(w_hi - shift)) + 1;
    for (long m = m_lo; m <= m_hi; ++m) {
      const double xs = static_cast<double>(m) + shift;
      if (xs < w_lo || xs >= w_hi) continue;
      const double x = static_cast<double>(m) + static_cast<double>(n) * tau;
      if (x > lo && x < hi) out.push_back({x, xs});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  return out;
}

inline double fibonacci_density(const FibonacciGas& g) { return 2.0 * g.window_halfwidth / sqrt5; }

namespace detail {

inline double integrate(const std::function<double(double)>& fn, double a, double b, double kink) {
  using boost::math::quadrature::gauss_kronrod;
  if (std::isfinite(kink) && kink > a && kink < b)
    return gauss_kronrod<double, 31>::integrate(fn, a, kink, 15, 1e-13) +
           gauss_kronrod<double, 31>::integrate(fn, kink, b, 15, 1e-13);
  return gauss_kronrod<double, 31>::integrate(fn, a, b, 15, 1e-13);
}

}  // namespace detail

/// (1/vol W)∫_W f and (1/vol W)∫_W f(1 − f).
inline std::pair<double, double> profile_moments(const FibonacciGas& g) {
  const double a = g.window_center - g.window_halfwidth, b = g.window_center + g.window_halfwidth;
  const double vol = b - a;
  const auto& f = g.profile.f;
  const double mean = detail::integrate(f, a, b, g.profile.kink) / vol;
  const double var = detail::integrate([&f](double y) { return f(y) * (1.0 - f(y)); }, a, b, g.profile.kink) / vol;
  return {mean, var};
}

/// f̂(u) = ∫_W f(y) e^{−2πiuy} dy
inline cplx profile_fourier(const FibonacciGas& g, double u) {
  const double a = g.window_center - g.window_halfwidth, b = g.window_center + g.window_halfwidth;
  const auto& f = g.profile.f;
  const double w = 2.0 * std::numbers::pi * u;
  const double re = detail::integrate([&](double y) { return f(y) * std::cos(w * y); }, a, b, g.profile.kink);
  const double im = detail::integrate([&](double y) { return -f(y) * std::sin(w * y); }, a, b, g.profile.kink);
  return {re, im};
}

struct ModulePoint {
  double k;
  double k_star;
};

/// Fourier module points k = (n1(τ−1) + n2)/√5 with star image k* = (n1τ − n2)/√5,
/// the projections of the dual of the embedding lattice {(x, x*)}.
inline std::vector<ModulePoint> fibonacci_module(double k_cutoff, double k_star_cutoff) {
  const double tau = golden_ratio;
  std::vector<ModulePoint> out;
  // n1 = k + k*
  const auto n1_max = static_cast<long>(std::ceil(k_cutoff + k_star_cutoff));
  for (long n1 = -n1_max; n1 <= n1_max; ++n1) {
    const double a = static_cast<double>(n1) * (tau - 1.0);
    const auto n2_lo = static_cast<long>(std::floor(-k_cutoff * sqrt5 - a)) - 1;
    const auto n2_hi = static_cast<long>(std::ceil(k_cutoff * sqrt5 - a)) + 1;
    for (long n2 = n2_lo; n2 <= n2_hi; ++n2) {
      const double k = (a + static_cast<double>(n2)) / sqrt5;
      const double ks = (static_cast<double>(n1) * tau - static_cast<double>(n2)) / sqrt5;
      if (std::abs(k) <= k_cutoff && std::abs(ks) <= k_star_cutoff) out.push_back({k, ks});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.k < y.k; });
  return out;
}

/// Deterministic weighted comb Σ f(x*) δ_x over the interval (lo, hi).
inline WeightedPointSet fibonacci_weighted_comb(const FibonacciGas& g, double lo, double hi) {
  WeightedPointSet ps(AveragingWindow::interval(lo, hi));
  for (const auto& p : fibonacci_points(g.window_center, g.window_halfwidth, lo, hi)) {
    const double x[1] = {p.x};
    ps.add_if_inside(x, g.profile.f(p.x_star));
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Poisson(rho) points in the bounding cube of `w`, kept when inside `w`.
inline WeightedPointSet poisson_in(double rho, const AveragingWindow& w, RngStream& rng) {
  const int d = w.dim();
  const double box_volume = std::pow(2.0 * w.scale(), d);
  const auto count = std::poisson_distribution<long>(rho * box_volume)(rng);
  WeightedPointSet ps(w);
  ps.reserve(static_cast<std::size_t>(count));
  Vec x(static_cast<std::size_t>(d));
  for (long i = 0; i < count; ++i) {
    for (int j = 0; j < d; ++j) x[j] = w.center()[j] + (2.0 * rng.uniform() - 1.0) * w.scale();
    ps.add_if_inside(x);
  }
  return ps;
}

/// Uniform grid of cells of side `cell` over the bounding box of `w`.
struct CellGrid {
  int dim;
  double cell;
  Vec lower;
  std::vector<long> extent;
  std::unordered_map<long, std::vector<std::size_t>> cells;

  CellGrid(const AveragingWindow& w, double cell_size) : dim(w.dim()), cell(cell_size), lower(w.lower()) {
    for (int i = 0; i < dim; ++i) extent.push_back(static_cast<long>(std::ceil(2.0 * w.scale() / cell)) + 1);
  }
  std::vector<long> coords(std::span<const double> x) const {
    std::vector<long> c(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
      c[i] = std::clamp(static_cast<long>(std::floor((x[i] - lower[i]) / cell)), 0L, extent[i] - 1);
    return c;
  }
  long key(const std::vector<long>& c) const {
    long k = 0;
    for (int i = dim - 1; i >= 0; --i) k = k * extent[i] + c[i];
    return k;
  }
  void insert(std::span<const double> x, std::size_t idx) { cells[key(coords(x))].push_back(idx); }

  /// Calls fn(j) for every stored index in the 3^d block around x.
  template <typename Fn>
  void for_neighbours(std::span<const double> x, Fn&& fn) const {
    const auto c = coords(x);
    std::vector<long> off(static_cast<std::size_t>(dim), -1);
    while (true) {
      std::vector<long> n(c);
      bool ok = true;
      for (int i = 0; i < dim; ++i) {
        n[i] += off[i];
        if (n[i] < 0 || n[i] >= extent[i]) ok = false;
      }
      if (ok) {
        if (auto it = cells.find(key(n)); it != cells.end())
          for (auto j : it->second) fn(j);
      }
      int i = 0;
      while (i < dim && ++off[i] > 1) off[i++] = -1;
      if (i == dim) break;
    }
  }
};

}  // namespace detail

inline WeightedPointSet sample_matern(const MaternProcess& m, const AveragingWindow& w, RngStream& rng) {
  const auto parent_window = w.resized(m.R);
  const auto parents = detail::poisson_in(m.rho, parent_window, rng);
  std::vector<double> marks(parents.size());
  for (auto& mk : marks) mk = rng.uniform();
  detail::CellGrid grid(parent_window, m.R);
  for (std::size_t i = 0; i < parents.size(); ++i) grid.insert(parents.point(i), i);
  WeightedPointSet out(w);
  const double r2 = m.R * m.R;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const auto xi = parents.point(i);
    if (!w.contains(xi)) continue;
    bool keep = true;
    grid.for_neighbours(xi, [&](std::size_t j) {
      if (!keep || j == i || marks[j] >= marks[i]) return;
      double d2 = 0.0;
      const auto xj = parents.point(j);
      for (int c = 0; c < m.dim; ++c) d2 += (xi[c] - xj[c]) * (xi[c] - xj[c]);
      if (d2 < r2) keep = false;
    });
    if (keep) out.add(xi);
  }
  return out;
}

/// One realisation of the centre process restricted to `w`.
inline WeightedPointSet sample_centre(const CentreProcess& p, const AveragingWindow& w, RngStream& rng) {
  if (process_dim(p) != w.dim()) throw Error("sample_centre: process and window dimensions differ");
  return std::visit(
      [&](const auto& v) -> WeightedPointSet {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PoissonProcess>) {
          return detail::poisson_in(v.rho, w, rng);
        } else if constexpr (std::is_same_v<T, LatticeProcess>) {
          const int d = v.dim;
          Vec offset(static_cast<std::size_t>(d), 0.0);
          if (v.random_offset)
            for (auto& o : offset) o = rng.uniform() * v.b;
          std::vector<long> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
          for (int i = 0; i < d; ++i) {
            lo[i] = static_cast<long>(std::floor((w.center()[i] - w.scale() - offset[i]) / v.b));
            hi[i] = static_cast<long>(std::ceil((w.center()[i] + w.scale() - offset[i]) / v.b));
          }
          WeightedPointSet ps(w);
          std::vector<long> idx(lo);
          Vec x(static_cast<std::size_t>(d));
          while (true) {
            for (int i = 0; i < d; ++i) x[i] = static_cast<double>(idx[i]) * v.b + offset[i];
            ps.add_if_inside(x);
            int i = 0;
            while (i < d && ++idx[i] > hi[i]) {
              idx[i] = lo[i];
              ++i;
            }
            if (i == d) break;
          }
          return ps;
        } else if constexpr (std::is_same_v<T, MaternProcess>) {
          return sample_matern(v, w, rng);
        } else {
          WeightedPointSet ps(w);
          const double lo = w.center()[0] - w.scale(), hi = w.center()[0] + w.scale();
          for (const auto& pt : fibonacci_points(v.window_center, v.window_halfwidth, lo, hi)) {
            if (rng.uniform() < v.profile.f(pt.x_star)) {
              const double x[1] = {pt.x};
              ps.add_if_inside(x);
            }
          }
          return ps;
        }
      },
      p);
}

inline double process_intensity(const CentreProcess& p) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PoissonProcess>) {
          return v.rho;
        } else if constexpr (std::is_same_v<T, LatticeProcess>) {
          return std::pow(v.b, -v.dim);
        } else if constexpr (std::is_same_v<T, MaternProcess>) {
          return matern_effective_density(v);
        } else {
          return fibonacci_density(v) * profile_moments(v).first;
        }
      },
      p);
}

/// Fourier transform of the indicator of B_R at |k|: (R/|k|)^{d/2} J_{d/2}(2π|k|R).
inline double ball_indicator_fourier(int d, double R, double k_norm) {
  if (k_norm == 0.0) return unit_ball_volume(d) * std::pow(R, d);
  return std::pow(R / k_norm, 0.5 * d) * std::cyl_bessel_j(0.5 * d, 2.0 * std::numbers::pi * k_norm * R);
}

struct ModelOptions {
  /// Atoms are enumerated with |k| <= k_cutoff.
  double k_cutoff = 10.0;
  /// Fibonacci only: internal-space cutoff |k*| for the module enumeration.
  double k_star_cutoff = 40.0;
};

/// Fibonacci Bragg normalisation c in c·|f̂(−k*)|², fixed so the k = 0 atom
/// equals (dens(Λ)·mean f)².
inline double fibonacci_bragg_constant(const FibonacciGas& g) {
  const double target = fibonacci_density(g) * profile_moments(g).first;
  return target * target / std::norm(profile_fourier(g, 0.0));
}

/// Analytic diffraction of the (undecorated) centre process.
inline SpectralModel analytic_centre_model(const CentreProcess& p, ModelOptions opt = {}) {
  SpectralModel m;
  m.dim = process_dim(p);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PoissonProcess>) {
          const double rho = v.rho;
          const int d = v.dim;
          m.label = "poisson";
          m.atoms_within = [rho, d](double) { return std::vector<Atom>{{Vec(static_cast<std::size_t>(d), 0.0), rho * rho}}; };
          m.density = [rho](std::span<const double>) { return rho; };
        } else if constexpr (std::is_same_v<T, LatticeProcess>) {
          const double dens = std::pow(v.b, -v.dim);
          const double spacing = 1.0 / v.b;
          const double cutoff = opt.k_cutoff;
          auto all = lattice_atoms(spacing, v.dim, dens * dens);
          m.label = "lattice";
          m.atoms_within = [all, cutoff](double r) { return all(std::min(r, cutoff)); };
          m.density = [](std::span<const double>) { return 0.0; };
        } else if constexpr (std::is_same_v<T, MaternProcess>) {
          const double rho_eff = matern_effective_density(v);
          const int d = v.dim;
          const double R = v.R;
          m.label = "matern";
          m.exact = false;
          m.atoms_within = [rho_eff, d](double) {
            return std::vector<Atom>{{Vec(static_cast<std::size_t>(d), 0.0), rho_eff * rho_eff}};
          };
          // hard-core hole term only; the smooth correction on (R, 2R) is not modelled
          m.density = [rho_eff, d, R](std::span<const double> k) {
            return rho_eff - rho_eff * rho_eff * ball_indicator_fourier(d, R, norm(k));
          };
        } else {
          const double c = fibonacci_bragg_constant(v);
          const double dens = fibonacci_density(v);
          const double vbar = profile_moments(v).second;
          std::vector<Atom> atoms;
          for (const auto& mp : fibonacci_module(opt.k_cutoff, opt.k_star_cutoff)) {
            const double w = c * std::norm(profile_fourier(v, -mp.k_star));
            if (w > 0.0) atoms.push_back({{mp.k}, w});
          }
          m.label = "fibonacci_gas";
          m.atoms_within = [atoms](double r) {
            std::vector<Atom> out;
            for (const auto& a : atoms)
              if (std::abs(a.k[0]) <= r) out.push_back(a);
            return out;
          };
          m.density = [dens, vbar](std::span<const double>) { return dens * vbar; };
        }
      },
      p);
  return m;
}

}  // namespace ppdiff
