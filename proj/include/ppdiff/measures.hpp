#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppdiff {

using cplx = std::complex<double>;
using Vec = std::vector<double>;

/// Raised for violated preconditions. `field` names the offending input
/// (a config path such as "process.law.p" when it comes from a scenario).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string field = {})
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(norm2(v)); }

inline double unit_ball_volume(int dim) {
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

// ---------------------------------------------------------------------------
// Averaging windows
// ---------------------------------------------------------------------------

enum class WindowKind { ball, cube };

/// Open ball or open cube (half-width `scale`) around `center`.
class AveragingWindow {
 public:
  AveragingWindow(WindowKind kind, double scale, int dim, Vec center = {})
      : kind_(kind), scale_(scale), dim_(dim), center_(std::move(center)) {
    if (dim_ < 1) throw Error("window dimension must be positive", "window.dim");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw Error("window scale must be positive", "window.scale");
    if (center_.empty()) center_.assign(static_cast<std::size_t>(dim_), 0.0);
    if (static_cast<int>(center_.size()) != dim_) throw Error("window center has wrong dimension", "window.center");
  }

  static AveragingWindow cube(double half_width, int dim, Vec center = {}) {
    return {WindowKind::cube, half_width, dim, std::move(center)};
  }
  static AveragingWindow ball(double radius, int dim, Vec center = {}) {
    return {WindowKind::ball, radius, dim, std::move(center)};
  }
  /// The interval (lo, hi) on the line.
  static AveragingWindow interval(double lo, double hi) {
    return cube(0.5 * (hi - lo), 1, {0.5 * (hi + lo)});
  }

  WindowKind kind() const { return kind_; }
  double scale() const { return scale_; }
  int dim() const { return dim_; }
  const Vec& center() const { return center_; }

  double volume() const {
    if (kind_ == WindowKind::cube) return std::pow(2.0 * scale_, dim_);
    return unit_ball_volume(dim_) * std::pow(scale_, dim_);
  }

  /// Strict interior membership.
  bool contains(std::span<const double> x) const {
    if (kind_ == WindowKind::cube) {
      for (int i = 0; i < dim_; ++i)
        if (!(std::abs(x[i] - center_[i]) < scale_)) return false;
      return true;
    }
    double r2 = 0.0;
    for (int i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
    return r2 < scale_ * scale_;
  }

  /// Same shape and centre with the scale changed by `delta` (erosion for delta < 0).
  AveragingWindow resized(double delta) const { return {kind_, scale_ + delta, dim_, center_}; }

  /// Volume of the outer boundary layer of thickness `thickness`, relative to
  /// the window volume. Tends to 0 as scale grows.
  double boundary_layer_ratio(double thickness) const {
    const double outer = std::pow((scale_ + thickness) / scale_, dim_);
    return outer - 1.0;
  }

  /// Volume of W ∩ (W + z) for a cube window; used for translation edge correction.
  double overlap_volume(std::span<const double> z) const {
    if (kind_ != WindowKind::cube) throw Error("overlap volume implemented for cube windows only");
    double v = 1.0;
    for (int i = 0; i < dim_; ++i) v *= std::max(0.0, 2.0 * scale_ - std::abs(z[i]));
    return v;
  }

  /// Lower corner of the bounding box.
  Vec lower() const {
    Vec lo(center_);
    for (double& c : lo) c -= scale_;
    return lo;
  }

 private:
  WindowKind kind_;
  double scale_;
  int dim_;
  Vec center_;
};

inline double window_volume(const AveragingWindow& w) { return w.volume(); }

// ---------------------------------------------------------------------------
// Weighted point sets
// ---------------------------------------------------------------------------

/// Finite realisation: points with complex weights inside a window.
/// Coordinates are stored flat (point i occupies [i*dim, (i+1)*dim)).
class WeightedPointSet {
 public:
  explicit WeightedPointSet(AveragingWindow window) : window_(std::move(window)) {}

  int dim() const { return window_.dim(); }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }
  const AveragingWindow& window() const { return window_; }

  std::span<const double> point(std::size_t i) const {
    const auto d = static_cast<std::size_t>(dim());
    return {coords_.data() + i * d, d};
  }
  cplx weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& coords() const { return coords_; }
  const std::vector<cplx>& weights() const { return weights_; }

  /// Adds a point; throws if it lies outside the window or the weight is not finite.
  void add(std::span<const double> x, cplx w = 1.0) {
    if (static_cast<int>(x.size()) != dim()) throw Error("point has wrong dimension");
    if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) throw Error("point weight must be finite");
    if (!window_.contains(x)) throw Error("point lies outside the window");
    coords_.insert(coords_.end(), x.begin(), x.end());
    weights_.push_back(w);
  }
  void add(std::initializer_list<double> x, cplx w = 1.0) { add(std::span<const double>(x.begin(), x.size()), w); }

  /// Adds the point only if it lies strictly inside the window.
  bool add_if_inside(std::span<const double> x, cplx w = 1.0) {
    if (!window_.contains(x)) return false;
    coords_.insert(coords_.end(), x.begin(), x.end());
    weights_.push_back(w);
    return true;
  }

  void reserve(std::size_t n) {
    coords_.reserve(n * static_cast<std::size_t>(dim()));
    weights_.reserve(n);
  }

  bool all_weights_real() const {
    for (const auto& w : weights_)
      if (w.imag() != 0.0) return false;
    return true;
  }

  friend bool operator==(const WeightedPointSet& a, const WeightedPointSet& b) {
    return a.dim() == b.dim() && a.coords_ == b.coords_ && a.weights_ == b.weights_;
  }

 private:
  AveragingWindow window_;
  std::vector<double> coords_;
  std::vector<cplx> weights_;
};

/// The points of `ps` strictly inside `w`, weights unchanged. The result carries window `w`.
inline WeightedPointSet restrict(const WeightedPointSet& ps, const AveragingWindow& w) {
  if (w.dim() != ps.dim()) throw Error("restrict: dimension mismatch");
  WeightedPointSet out(w);
  for (std::size_t i = 0; i < ps.size(); ++i) out.add_if_inside(ps.point(i), ps.weight(i));
  return out;
}

/// Text format: `dim=<d> count=<n>` header, then `x1 .. xd re im` per line.
/// The window is not part of the format; readers supply it.
inline void write_point_set(std::ostream& os, const WeightedPointSet& ps) {
  os << "dim=" << ps.dim() << " count=" << ps.size() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (double x : ps.point(i)) os << x << ' ';
    os << ps.weight(i).real() << ' ' << ps.weight(i).imag() << '\n';
  }
}

inline WeightedPointSet read_point_set(std::istream& is, const AveragingWindow& window) {
  std::string header;
  if (!std::getline(is, header)) throw Error("point set: missing header");
  int dim = 0;
  long long count = -1;
  if (std::sscanf(header.c_str(), "dim=%d count=%lld", &dim, &count) != 2 || dim < 1 || count < 0)
    throw Error("point set: malformed header '" + header + "'");
  if (dim != window.dim()) throw Error("point set: header dimension does not match window");
  WeightedPointSet ps(window);
  ps.reserve(static_cast<std::size_t>(count));
  Vec x(static_cast<std::size_t>(dim));
  for (long long i = 0; i < count; ++i) {
    double re = 0.0, im = 0.0;
    for (auto& c : x)
      if (!(is >> c)) throw Error("point set: truncated at point " + std::to_string(i));
    if (!(is >> re >> im)) throw Error("point set: truncated at point " + std::to_string(i));
    ps.add(x, {re, im});
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Finite clusters
// ---------------------------------------------------------------------------

struct ClusterPoint {
  Vec offset;
  cplx weight;
};

/// A realisation of a finite (complex) cluster measure; may be empty.
struct FiniteCluster {
  std::vector<ClusterPoint> points;

  double total_variation() const {
    double s = 0.0;
    for (const auto& p : points) s += std::abs(p.weight);
    return s;
  }
  cplx total_mass() const {
    cplx s = 0.0;
    for (const auto& p : points) s += p.weight;
    return s;
  }
  /// Σ w e^{-2πi k·s}
  cplx fourier(std::span<const double> k) const {
    cplx s = 0.0;
    for (const auto& p : points) {
      double phase = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) phase += k[i] * p.offset[i];
      s += p.weight * std::polar(1.0, -2.0 * std::numbers::pi * phase);
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Spectral models
// ---------------------------------------------------------------------------

struct Atom {
  Vec k;
  double weight;
};

/// Diffraction measure as pure-point atoms plus an absolutely continuous
/// density. Atom sets may be infinite (lattice combs), so they are produced
/// on demand within a radius. Densities are undefined on `is_singular`.
struct SpectralModel {
  int dim = 1;
  std::string label;
  /// All atoms with |k| <= radius.
  std::function<std::vector<Atom>(double radius)> atoms_within = [](double) { return std::vector<Atom>{}; };
  std::function<double(std::span<const double>)> density = [](std::span<const double>) { return 0.0; };
  /// True when k is within `tol` of a point where the density formula is undefined.
  std::function<bool(std::span<const double>, double tol)> is_singular = [](std::span<const double>, double) {
    return false;
  };
  /// False when part of the model is computed approximately.
  bool exact = true;
};

struct SpectralValue {
  double pp_weight = 0.0;
  std::optional<double> ac_value;
};

/// Atom weight near k (within atom_tol) and the density at k.
inline SpectralValue spectral_eval(const SpectralModel& m, std::span<const double> k, double atom_tol) {
  if (static_cast<int>(k.size()) != m.dim) throw Error("spectral_eval: dimension mismatch");
  for (double c : k)
    if (!std::isfinite(c)) throw Error("spectral_eval: k must be finite");
  SpectralValue out;
  bool hit = false;
  for (const auto& a : m.atoms_within(norm(k) + atom_tol)) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) d2 += (a.k[i] - k[i]) * (a.k[i] - k[i]);
    if (std::sqrt(d2) <= atom_tol) {
      if (hit) throw Error("spectral_eval: two atoms within atom_tol; resolution too coarse");
      out.pp_weight = a.weight;
      hit = true;
    }
  }
  if (!m.is_singular(k, atom_tol)) out.ac_value = m.density(k);
  return out;
}

/// Dual-lattice comb `weight · δ_{(1/b)Z^d}` enumerated within a radius.
inline std::function<std::vector<Atom>(double)> lattice_atoms(double spacing, int dim, double weight) {
  return [spacing, dim, weight](double radius) {
    std::vector<Atom> out;
    const long n = static_cast<long>(std::floor(radius / spacing));
    std::vector<long> idx(static_cast<std::size_t>(dim), -n);
    while (true) {
      Vec k(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) k[i] = static_cast<double>(idx[i]) * spacing;
      if (norm(k) <= radius) out.push_back({k, weight});
      int j = 0;
      while (j < dim && ++idx[j] > n) idx[j++] = -n;
      if (j == dim) break;
    }
    return out;
  };
}

/// True when k is within tol of the lattice spacing·Z^d.
inline bool near_lattice(std::span<const double> k, double spacing, double tol) {
  double d2 = 0.0;
  for (double c : k) {
    const double r = c - spacing * std::round(c / spacing);
    d2 += r * r;
  }
  return std::sqrt(d2) <= tol;
}

}  // namespace ppdiff
