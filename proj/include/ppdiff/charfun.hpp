#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "measures.hpp"

namespace ppdiff {

/// Exact rational for atom positions, so lattice detection can be exact.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw Error("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const auto g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

/// gcd of positive rationals: the largest g with every x_i in gZ.
inline Rational rational_gcd(const std::vector<Rational>& xs) {
  std::int64_t lcm_den = 1;
  for (const auto& x : xs) lcm_den = std::lcm(lcm_den, x.den);
  std::int64_t g = 0;
  for (const auto& x : xs) g = std::gcd(g, x.num * (lcm_den / x.den));
  return {g, lcm_den};
}

/// Mean-one inter-arrival law on the positive half-line.
class InterArrivalLaw {
 public:
  enum class Kind { exponential, gamma, two_atom, finite_atoms, deterministic };

  static InterArrivalLaw exponential() {
    InterArrivalLaw l(Kind::exponential);
    l.alpha_ = 1.0;
    return l;
  }

  static InterArrivalLaw gamma(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("gamma shape must be positive", "alpha");
    InterArrivalLaw l(Kind::gamma);
    l.alpha_ = alpha;
    return l;
  }

  /// p·δ_a + (1-p)·δ_b with p·a + (1-p)·b = 1.
  static InterArrivalLaw two_atom(double a, double b, double p) {
    InterArrivalLaw l = finite_atoms(std::vector<double>{a, b}, std::vector<double>{p, 1.0 - p});
    l.kind_ = Kind::two_atom;
    return l;
  }
  static InterArrivalLaw two_atom(Rational a, Rational b, Rational p) {
    InterArrivalLaw l = finite_atoms(std::vector<Rational>{a, b}, std::vector<Rational>{p, Rational(1) + Rational(-1) * p});
    l.kind_ = Kind::two_atom;
    return l;
  }

  static InterArrivalLaw finite_atoms(std::vector<double> atoms, std::vector<double> probs) {
    InterArrivalLaw l(Kind::finite_atoms);
    l.atoms_ = std::move(atoms);
    l.probs_ = std::move(probs);
    l.validate_atoms();
    return l;
  }
  static InterArrivalLaw finite_atoms(const std::vector<Rational>& atoms, const std::vector<Rational>& probs) {
    if (atoms.size() != probs.size()) throw Error("atoms and probabilities differ in length", "p");
    Rational mass(0), mean(0);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      mass = mass + probs[i];
      mean = mean + probs[i] * atoms[i];
    }
    if (!(mass == Rational(1))) throw Error("probabilities must sum to 1", "p");
    if (!(mean == Rational(1))) throw Error("law must have mean 1 (sum p_i a_i = 1)", "a");
    InterArrivalLaw l(Kind::finite_atoms);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      l.atoms_.push_back(atoms[i].value());
      l.probs_.push_back(probs[i].value());
    }
    l.exact_atoms_ = atoms;
    l.validate_atoms();
    return l;
  }

  static InterArrivalLaw deterministic(double a = 1.0) {
    if (a != 1.0) throw Error("deterministic law must sit at 1 (mean one)", "a");
    InterArrivalLaw l(Kind::deterministic);
    l.atoms_ = {1.0};
    l.probs_ = {1.0};
    l.exact_atoms_ = std::vector<Rational>{Rational(1)};
    return l;
  }

  Kind kind() const { return kind_; }
  bool absolutely_continuous() const { return kind_ == Kind::exponential || kind_ == Kind::gamma; }
  double alpha() const { return alpha_; }
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::optional<std::vector<Rational>>& exact_atoms() const { return exact_atoms_; }

  double variance() const {
    if (absolutely_continuous()) return 1.0 / alpha_;
    double m2 = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) m2 += probs_[i] * atoms_[i] * atoms_[i];
    return m2 - 1.0;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::exponential: return "exponential";
      case Kind::gamma: return "gamma(" + std::to_string(alpha_) + ")";
      case Kind::two_atom: return "two_atom";
      case Kind::finite_atoms: return "finite_atoms";
      case Kind::deterministic: return "deterministic";
    }
    return "?";
  }

 private:
  explicit InterArrivalLaw(Kind k) : kind_(k) {}

  void validate_atoms() {
    if (atoms_.empty() || atoms_.size() != probs_.size()) throw Error("atoms and probabilities differ in length", "p");
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!(atoms_[i] > 0.0) || !std::isfinite(atoms_[i])) throw Error("atoms must be strictly positive", "a");
      if (!(probs_[i] >= 0.0 && probs_[i] <= 1.0)) throw Error("probabilities must lie in [0,1]", "p");
      mass += probs_[i];
      mean += probs_[i] * atoms_[i];
    }
    if (std::abs(mass - 1.0) > 1e-12) throw Error("probabilities must sum to 1", "p");
    if (std::abs(mean - 1.0) > 1e-12) throw Error("law must have mean 1 (sum p_i a_i = 1)", "a");
  }

  Kind kind_;
  double alpha_ = 0.0;
  std::vector<double> atoms_;
  std::vector<double> probs_;
  std::optional<std::vector<Rational>> exact_atoms_;
};

// ---------------------------------------------------------------------------

namespace detail {

/// (1 + 2πik/α)^α − 1, accurate for small k (avoids cancellation in h near 0).
inline cplx gamma_inverse_cf_minus_one(double alpha, double k) {
  const double y = 2.0 * std::numbers::pi * k / alpha;
  const double re = alpha * 0.5 * std::log1p(y * y);
  const double im = alpha * std::atan(y);
  const double s = std::sin(0.5 * im);
  return {std::expm1(re) * std::cos(im) - 2.0 * s * s, std::exp(re) * std::sin(im)};
}

/// 1 − ϱ̂(k) for an atomic law, as Σ p (2 sin²(πka) + i sin(2πka)), exact near the lattice.
inline cplx atomic_one_minus_cf(const InterArrivalLaw& law, double k) {
  cplx u = 0.0;
  for (std::size_t i = 0; i < law.atoms().size(); ++i) {
    const double t = std::numbers::pi * k * law.atoms()[i];
    const double s = std::sin(t);
    u += law.probs()[i] * cplx(2.0 * s * s, std::sin(2.0 * t));
  }
  return u;
}

}  // namespace detail

/// Characteristic function ∫ e^{-2πikx} dϱ(x).
inline cplx charfun(const InterArrivalLaw& law, double k) {
  const double tpk = 2.0 * std::numbers::pi * k;
  if (law.absolutely_continuous()) {
    // principal branch; Re(1 + 2πik/α) = 1 never crosses the cut
    return std::exp(-law.alpha() * std::log(cplx(1.0, tpk / law.alpha())));
  }
  cplx s = 0.0;
  for (std::size_t i = 0; i < law.atoms().size(); ++i) s += law.probs()[i] * std::polar(1.0, -tpk * law.atoms()[i]);
  return s;
}

/// Largest b with supp(ϱ) ⊂ bZ, or nullopt for non-lattice laws.
///
/// Rational atoms are handled exactly. Float atoms go through a
/// continued-fraction commensurability test (tolerance 1e-9, denominators up
/// to 10^4); anything not resolved within those limits is reported as
/// non-lattice.
inline std::optional<double> lattice_classification(const InterArrivalLaw& law) {
  if (law.absolutely_continuous()) return std::nullopt;
  if (law.exact_atoms()) {
    std::vector<Rational> support;
    for (std::size_t i = 0; i < law.atoms().size(); ++i)
      if (law.probs()[i] > 0.0) support.push_back((*law.exact_atoms())[i]);
    return rational_gcd(support).value();
  }
  std::vector<double> support;
  for (std::size_t i = 0; i < law.atoms().size(); ++i)
    if (law.probs()[i] > 0.0) support.push_back(law.atoms()[i]);
  const double base = support.front();
  constexpr double tol = 1e-9;
  constexpr std::int64_t max_den = 10000;
  std::vector<std::int64_t> nums, dens;
  for (double a : support) {
    const double r = a / base;
    // continued-fraction convergents h/k of r
    std::int64_t h0 = 1, h1 = 0, k0 = 0, k1 = 1;
    double x = r;
    bool found = false;
    for (int it = 0; it < 64; ++it) {
      const double fl = std::floor(x);
      const auto ai = static_cast<std::int64_t>(fl);
      const std::int64_t h = ai * h0 + h1, kk = ai * k0 + k1;
      if (kk > max_den) break;
      h1 = h0;
      h0 = h;
      k1 = k0;
      k0 = kk;
      if (std::abs(r - static_cast<double>(h) / static_cast<double>(kk)) <= tol * r) {
        found = true;
        break;
      }
      const double frac = x - fl;
      if (frac < 1e-15) break;
      x = 1.0 / frac;
    }
    if (!found) return std::nullopt;
    nums.push_back(h0);
    dens.push_back(k0);
  }
  std::int64_t q = 1;
  for (auto d : dens) q = std::lcm(q, d);
  std::int64_t g = 0;
  for (std::size_t i = 0; i < nums.size(); ++i) g = std::gcd(g, nums[i] * (q / dens[i]));
  return base / static_cast<double>(q) * static_cast<double>(g);
}

/// True where ϱ̂(k) = 1, i.e. k = 0 or k ∈ (1/b)Z for lattice-like laws.
inline bool renewal_singular(const InterArrivalLaw& law, double k, double tol = 1e-12) {
  if (std::abs(k) <= tol) return true;
  if (const auto b = lattice_classification(law)) {
    const double kb = k * *b;
    return std::abs(kb - std::round(kb)) <= tol * std::max(1.0, std::abs(kb));
  }
  return false;
}

/// h(k) = 2(|ϱ̂|² − Re ϱ̂)/|1 − ϱ̂|²; nullopt on the singular set.
inline std::optional<double> h(const InterArrivalLaw& law, double k) {
  if (renewal_singular(law, k)) return std::nullopt;
  if (law.absolutely_continuous()) {
    // with w = 1/ϱ̂: h = 2(1 − Re w)/|1 − w|²
    const cplx wm1 = detail::gamma_inverse_cf_minus_one(law.alpha(), k);
    return -2.0 * wm1.real() / std::norm(wm1);
  }
  // with u = 1 − ϱ̂: h = 2 − 2 Re u/|u|²
  const cplx u = detail::atomic_one_minus_cf(law, k);
  const double denom = std::norm(u);
  if (denom == 0.0) return std::nullopt;
  return 2.0 - 2.0 * u.real() / denom;
}

/// ν̂(k) = ϱ̂/(1 − ϱ̂), the transform of ν = Σ_{n≥1} ϱ^{*n}; nullopt on the singular set.
inline std::optional<cplx> nu_hat(const InterArrivalLaw& law, double k) {
  if (renewal_singular(law, k)) return std::nullopt;
  if (law.absolutely_continuous()) {
    const cplx wm1 = detail::gamma_inverse_cf_minus_one(law.alpha(), k);
    return 1.0 / wm1;
  }
  const cplx u = detail::atomic_one_minus_cf(law, k);
  if (u == cplx(0.0)) return std::nullopt;
  return 1.0 / u - 1.0;
}

// ---------------------------------------------------------------------------
// ν_n = ϱ + ϱ*ϱ + ... + ϱ^{*n}
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> check_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw Error("nu_partial: grid needs at least two points");
  if (grid.front() > 0.0) throw Error("nu_partial: grid must start at or below 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error("nu_partial: grid must be increasing");
  const double x_max = grid.back();
  if (!(x_max > 0.0)) throw Error("nu_partial: grid must extend past 0");
  double max_step = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] > 0.0) max_step = std::max(max_step, grid[i] - std::max(0.0, grid[i - 1]));
  if (max_step > x_max / 1000.0) throw Error("nu_partial: grid too coarse (step > x_max/1000)");
  return grid;
}

}  // namespace detail

/// Atoms of ν_n = Σ_{j≤n} ϱ^{*j} on (0, x_max] for an atomic law, by exact
/// convolution of atom lists (positions merged within 1e-12).
inline std::map<double, double> nu_atoms(const InterArrivalLaw& law, int n, double x_max) {
  if (law.absolutely_continuous()) throw Error("nu_atoms: law is not atomic");
  auto merge_into = [](std::map<double, double>& m, double x, double w) {
    auto it = m.lower_bound(x - 1e-12);
    if (it != m.end() && std::abs(it->first - x) <= 1e-12) {
      it->second += w;
    } else {
      m[x] += w;
    }
  };
  std::map<double, double> base;
  for (std::size_t i = 0; i < law.atoms().size(); ++i)
    if (law.probs()[i] > 0.0) base[law.atoms()[i]] += law.probs()[i];
  std::map<double, double> power, total;
  for (const auto& [x, w] : base)
    if (x <= x_max + 1e-9) power[x] = w;
  for (int j = 1; j <= n && !power.empty(); ++j) {
    for (const auto& [x, w] : power) merge_into(total, x, w);
    if (j == n) break;
    std::map<double, double> next;
    for (const auto& [x, w] : power)
      for (const auto& [y, v] : base)
        if (x + y <= x_max + 1e-9) merge_into(next, x + y, w * v);
    power = std::move(next);
  }
  return total;
}

/// Cumulative masses ν_n([0, x]) at the grid points.
///
/// Atomic laws are convolved exactly (atoms merged within 1e-12); absolutely
/// continuous laws are projected onto linear hat functions on a uniform node
/// grid of 4000 cells over [0, x_max] and convolved there. Masses sitting
/// exactly on a node count half at that node (Θ(0) = 1/2).
inline std::vector<double> nu_partial(const InterArrivalLaw& law, int n, const std::vector<double>& grid) {
  if (n < 1) throw Error("nu_partial: n must be positive");
  detail::check_grid(grid);
  const double x_max = grid.back();
  std::vector<double> out(grid.size(), 0.0);

  if (!law.absolutely_continuous()) {
    const auto total = nu_atoms(law, n, x_max);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double c = 0.0;
      for (const auto& [x, w] : total) {
        if (x < grid[g] - 1e-12) {
          c += w;
        } else if (std::abs(x - grid[g]) <= 1e-12) {
          c += 0.5 * w;
        }
      }
      out[g] = c;
    }
    return out;
  }

  const std::size_t cells = 4000;
  const double step = x_max / static_cast<double>(cells);
  const double a = law.alpha();
  auto cdf = [a](double x) { return x <= 0.0 ? 0.0 : boost::math::gamma_p(a, a * x); };
  // ∫_0^x t dϱ(t): t·f_α(t) is the Gamma(α+1, rate α) density
  auto moment1 = [a](double x) { return x <= 0.0 ? 0.0 : boost::math::gamma_p(a + 1.0, a * x); };
  std::vector<double> base(cells + 1, 0.0);
  for (std::size_t i = 0; i <= cells; ++i) {
    const double xi = step * static_cast<double>(i);
    double m = 0.0;
    if (i > 0) {
      const double lo = xi - step;
      m += (moment1(xi) - moment1(lo) - lo * (cdf(xi) - cdf(lo))) / step;
    }
    const double hi = xi + step;
    m += (hi * (cdf(hi) - cdf(xi)) - (moment1(hi) - moment1(xi))) / step;
    base[i] = m;
  }
  std::vector<double> power = base, total(cells + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    double mass = 0.0;
    for (std::size_t i = 0; i <= cells; ++i) {
      total[i] += power[i];
      mass += power[i];
    }
    if (j == n || mass < 1e-16) break;
    std::vector<double> next(cells + 1, 0.0);
    for (std::size_t i = 0; i <= cells; ++i) {
      if (power[i] == 0.0) continue;
      for (std::size_t l = 0; i + l <= cells; ++l) next[i + l] += power[i] * base[l];
    }
    power = std::move(next);
  }
  // cumulative with half weight on the node itself, then linear interpolation
  std::vector<double> cum(cells + 1, 0.0);
  double running = 0.0;
  for (std::size_t i = 0; i <= cells; ++i) {
    cum[i] = running + 0.5 * total[i];
    running += total[i];
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    if (x < 0.0) continue;
    const double pos = x / step;
    const auto i = std::min(static_cast<std::size_t>(pos), cells - 1);
    const double t = pos - static_cast<double>(i);
    out[g] = (1.0 - t) * cum[i] + t * cum[i + 1];
  }
  return out;
}

/// Density of ν for the gamma family: α e^{−αx} Σ_{n≥1} (αx)^{nα−1}/Γ(nα).
///
/// Terms are summed in log space. Summation stops once ten consecutive
/// terms past the peak fall below truncation_tol·(partial sum); hard cap
/// 10^5 terms.
inline double g_alpha(double alpha, double x, double truncation_tol = 1e-15) {
  if (!(alpha > 0.0)) throw Error("g_alpha: alpha must be positive");
  if (!(x > 0.0)) throw Error("g_alpha: x must be positive");
  const double lax = std::log(alpha * x);
  const double prefactor = std::log(alpha) - alpha * x;
  double sum = 0.0;
  double prev = -1.0;
  int small_run = 0;
  for (int n = 1; n <= 100000; ++n) {
    const double na = n * alpha;
    const double term = std::exp(prefactor + (na - 1.0) * lax - std::lgamma(na));
    sum += term;
    const bool decreasing = prev >= 0.0 && term <= prev;
    prev = term;
    if (decreasing && term < truncation_tol * sum) {
      if (++small_run >= 10) break;
    } else {
      small_run = 0;
    }
  }
  return sum;
}

/// Fourier transform of |x|^{α−d} on R^d at k ≠ 0:
/// (Γ(α/2)/π^{α/2}) / (Γ((d−α)/2)/π^{(d−α)/2}) · |k|^{−α}.
inline double riesz_fourier(int d, double alpha, std::span<const double> k) {
  if (d < 1) throw Error("riesz_fourier: dimension must be positive");
  if (!(alpha > 0.0 && alpha < d)) throw Error("riesz_fourier: alpha must lie in (0, d)");
  if (static_cast<int>(k.size()) != d) throw Error("riesz_fourier: k has wrong dimension");
  const double kn = norm(k);
  if (!(kn > 0.0)) throw Error("riesz_fourier: k must be nonzero");
  const double pi = std::numbers::pi;
  const double c_alpha = std::tgamma(0.5 * alpha) / std::pow(pi, 0.5 * alpha);
  const double c_dual = std::tgamma(0.5 * (d - alpha)) / std::pow(pi, 0.5 * (d - alpha));
  return c_alpha / c_dual * std::pow(kn, -alpha);
}

// ---------------------------------------------------------------------------
// Poisson summation checks
// ---------------------------------------------------------------------------

/// η(n) = #{m ∈ Z² : |m|² = n} for n ≤ n_max (shelling of the square lattice).
inline std::map<long, long> square_lattice_shells(long n_max) {
  std::map<long, long> eta;
  const long r = static_cast<long>(std::floor(std::sqrt(static_cast<double>(n_max))));
  for (long i = -r; i <= r; ++i)
    for (long j = -r; j <= r; ++j)
      if (i * i + j * j <= n_max) ++eta[i * i + j * j];
  return eta;
}

namespace detail {

/// Σ_{x ∈ spacing·Z^d, |x| ≤ r_max} e^{−π|x|²}
inline double gaussian_lattice_sum(int d, double spacing, double r_max) {
  const long n = static_cast<long>(std::floor(r_max / spacing));
  std::vector<long> idx(static_cast<std::size_t>(d), -n);
  double s = 0.0;
  while (true) {
    double r2 = 0.0;
    for (long i : idx) r2 += static_cast<double>(i * i) * spacing * spacing;
    if (r2 <= r_max * r_max) s += std::exp(-std::numbers::pi * r2);
    int j = 0;
    while (j < d && ++idx[j] > n) idx[j++] = -n;
    if (j == d) break;
  }
  return s;
}

}  // namespace detail

/// |Σ_{x∈bZ^d} e^{−π|x|²} − b^{−d} Σ_{k∈Z^d/b} e^{−π|k|²}|, both truncated at r_max.
/// For d = 2 the lattice side is summed shell by shell, Σ_r η(r) e^{−πr²}.
inline double gaussian_psf_check(int d, double b, double r_max) {
  if (d < 1) throw Error("gaussian_psf_check: dimension must be positive");
  if (!(b > 0.0)) throw Error("gaussian_psf_check: b must be positive");
  if (std::exp(-std::numbers::pi * r_max * r_max) * std::pow(r_max + 1.0, d) > 1e-12)
    throw Error("gaussian_psf_check: r_max too small for a 1e-12 Gaussian tail");
  double lhs = 0.0;
  if (d == 2) {
    const auto n_max = static_cast<long>(std::floor(r_max * r_max / (b * b)));
    for (const auto& [n2, count] : square_lattice_shells(n_max))
      lhs += static_cast<double>(count) * std::exp(-std::numbers::pi * b * b * static_cast<double>(n2));
  } else {
    lhs = detail::gaussian_lattice_sum(d, b, r_max);
  }
  const double rhs = std::pow(b, -d) * detail::gaussian_lattice_sum(d, 1.0 / b, r_max);
  return std::abs(lhs - rhs);
}

}  // namespace ppdiff
