#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "measures.hpp"

namespace ppdiff {

/// Sum and sum of squares over realisations, merged in a fixed order.
struct RunningStats {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  }
  double stderr_() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

// ---------------------------------------------------------------------------
// Periodograms
// ---------------------------------------------------------------------------

/// I(k) = |Σ w_x e^{−2πi k·x}|² / vol, evaluated directly.
inline std::vector<double> periodogram(const WeightedPointSet& ps, const std::vector<Vec>& k_grid) {
  const double vol = ps.window().volume();
  std::vector<double> out;
  out.reserve(k_grid.size());
  for (const auto& k : k_grid) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto x = ps.point(i);
      double ph = 0.0;
      for (std::size_t c = 0; c < k.size(); ++c) ph += k[c] * x[c];
      ph -= std::floor(ph);
      const double cs = std::cos(2.0 * std::numbers::pi * ph), sn = -std::sin(2.0 * std::numbers::pi * ph);
      const cplx w = ps.weight(i);
      re += w.real() * cs - w.imag() * sn;
      im += w.real() * sn + w.imag() * cs;
    }
    out.push_back((re * re + im * im) / vol);
  }
  return out;
}

/// Grid k_j = origin + j·step (j < count), each probed at k_j + m·offset for
/// m in [m_lo, m_hi]. Phasors are advanced by recurrence along j and m.
struct KRay {
  Vec origin;
  Vec step;
  std::size_t count = 0;
  Vec offset;
  int m_lo = 0;
  int m_hi = 0;

  std::size_t width() const { return static_cast<std::size_t>(m_hi - m_lo + 1); }
  Vec k(std::size_t j) const {
    Vec v(origin);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] += static_cast<double>(j) * step[c];
    return v;
  }
};

/// Returns I at (j, m) in row-major order, j slow.
inline std::vector<double> ray_periodogram(const WeightedPointSet& ps, const KRay& ray) {
  const std::size_t M = ray.width();
  const std::size_t total = ray.count * M;
  std::vector<double> re(total, 0.0), im(total, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  auto phasor = [&](double ph) {
    ph -= std::floor(ph);
    return std::pair{std::cos(two_pi * ph), -std::sin(two_pi * ph)};
  };
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto x = ps.point(i);
    double a = 0.0, s = 0.0, t = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      a += ray.origin[c] * x[c];
      s += ray.step[c] * x[c];
      t += ray.offset[c] * x[c];
    }
    const auto [b_re0, b_im0] = phasor(a + ray.m_lo * t);
    const auto [s_re, s_im] = phasor(s);
    const auto [t_re, t_im] = phasor(t);
    const cplx w = ps.weight(i);
    double b_re = w.real() * b_re0 - w.imag() * b_im0;
    double b_im = w.real() * b_im0 + w.imag() * b_re0;
    for (std::size_t j = 0; j < ray.count; ++j) {
      double c_re = b_re, c_im = b_im;
      double* rr = re.data() + j * M;
      double* ii = im.data() + j * M;
      for (std::size_t m = 0; m < M; ++m) {
        rr[m] += c_re;
        ii[m] += c_im;
        const double n_re = c_re * t_re - c_im * t_im;
        c_im = c_re * t_im + c_im * t_re;
        c_re = n_re;
      }
      const double n_re = b_re * s_re - b_im * s_im;
      b_im = b_re * s_im + b_im * s_re;
      b_re = n_re;
    }
  }
  const double vol = ps.window().volume();
  std::vector<double> out(total);
  for (std::size_t q = 0; q < total; ++q) out[q] = (re[q] * re[q] + im[q] * im[q]) / vol;
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum estimation plan and per-realisation samples
// ---------------------------------------------------------------------------

/// Offsets (in units of the band step 1/L) used to read the local noise floor.
/// They sit on zeros of the window kernel, so a Bragg peak at k0 does not leak
/// into them.
inline const std::vector<int>& side_offsets() {
  static const std::vector<int> s{3, 4, 5, 6};
  return s;
}

struct SpectrumPlan {
  KRay ray;                  ///< m range covers the band and, when scanning, the side offsets
  int band_half = 4;         ///< ac estimate averages I over |m| ≤ band_half
  bool scan = false;         ///< record I(k_j) minus the side-band floor at each grid point
  std::vector<Vec> atom_k;   ///< candidate Bragg positions

  static SpectrumPlan make(const AveragingWindow& w, Vec origin, Vec step, std::size_t count, int band_half,
                           bool scan, std::vector<Vec> atom_k) {
    SpectrumPlan p;
    const int d = w.dim();
    p.ray.origin = std::move(origin);
    p.ray.step = std::move(step);
    p.ray.count = count;
    p.ray.offset = Vec(static_cast<std::size_t>(d), 0.0);
    p.ray.offset[0] = 1.0 / (2.0 * w.scale());
    const int reach = scan ? std::max(band_half, side_offsets().back()) : band_half;
    p.ray.m_lo = -reach;
    p.ray.m_hi = reach;
    p.band_half = band_half;
    p.scan = scan;
    p.atom_k = std::move(atom_k);
    return p;
  }
  std::vector<Vec> k_grid() const {
    std::vector<Vec> g;
    for (std::size_t j = 0; j < ray.count; ++j) g.push_back(ray.k(j));
    return g;
  }
};

struct SpectrumSample {
  std::vector<double> smoothed;
  std::vector<double> scan;
  std::vector<double> atoms;
};

/// Bragg estimate (I(k0) − mean of side-band I) / vol at each k0.
inline std::vector<double> bragg_excess(const WeightedPointSet& ps, const std::vector<Vec>& atom_k) {
  const double vol = ps.window().volume();
  const double delta = 1.0 / (2.0 * ps.window().scale());
  std::vector<double> out;
  for (const auto& k0 : atom_k) {
    std::vector<Vec> ks{k0};
    for (int s : side_offsets())
      for (int sign : {-1, 1}) {
        Vec k(k0);
        k[0] += sign * s * delta;
        ks.push_back(std::move(k));
      }
    const auto I = periodogram(ps, ks);
    double side = 0.0;
    for (std::size_t q = 1; q < I.size(); ++q) side += I[q];
    side /= static_cast<double>(I.size() - 1);
    out.push_back((I[0] - side) / vol);
  }
  return out;
}

inline SpectrumSample sample_spectrum(const WeightedPointSet& ps, const SpectrumPlan& plan) {
  SpectrumSample s;
  const auto I = ray_periodogram(ps, plan.ray);
  const std::size_t M = plan.ray.width();
  const int zero = -plan.ray.m_lo;
  const double vol = ps.window().volume();
  for (std::size_t j = 0; j < plan.ray.count; ++j) {
    const double* row = I.data() + j * M;
    double band = 0.0;
    for (int m = -plan.band_half; m <= plan.band_half; ++m) band += row[zero + m];
    s.smoothed.push_back(band / (2.0 * plan.band_half + 1.0));
    if (plan.scan) {
      double side = 0.0;
      for (int o : side_offsets()) side += row[zero + o] + row[zero - o];
      side /= 2.0 * static_cast<double>(side_offsets().size());
      s.scan.push_back((row[zero] - side) / vol);
    }
  }
  s.atoms = bragg_excess(ps, plan.atom_k);
  return s;
}

struct AtomEstimate {
  Vec k;
  double weight;
  double stderr_;
};

struct EmpiricalSpectrum {
  int dim = 1;
  std::vector<Vec> k_grid;
  std::vector<double> intensity_mean;
  std::vector<double> intensity_stderr;
  std::vector<double> scan_mean;
  std::vector<double> scan_stderr;
  std::size_t realisation_count = 0;
  double window_volume = 0.0;
  double window_scale = 0.0;
  std::vector<AtomEstimate> atoms;
};

/// Reduces per-realisation samples in index order.
inline EmpiricalSpectrum merge_spectrum(const std::vector<SpectrumSample>& samples, const SpectrumPlan& plan,
                                        const AveragingWindow& w) {
  EmpiricalSpectrum e;
  e.dim = w.dim();
  e.k_grid = plan.k_grid();
  e.realisation_count = samples.size();
  e.window_volume = w.volume();
  e.window_scale = w.scale();
  const std::size_t K = plan.ray.count;
  std::vector<RunningStats> sm(K), sc(plan.scan ? K : 0), at(plan.atom_k.size());
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < K; ++j) sm[j].add(s.smoothed[j]);
    for (std::size_t j = 0; j < sc.size(); ++j) sc[j].add(s.scan[j]);
    for (std::size_t a = 0; a < at.size(); ++a) at[a].add(s.atoms[a]);
  }
  for (const auto& r : sm) {
    e.intensity_mean.push_back(r.mean());
    e.intensity_stderr.push_back(r.stderr_());
  }
  for (const auto& r : sc) {
    e.scan_mean.push_back(r.mean());
    e.scan_stderr.push_back(r.stderr_());
  }
  for (std::size_t a = 0; a < at.size(); ++a) e.atoms.push_back({plan.atom_k[a], at[a].mean(), at[a].stderr_()});
  return e;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d2);
}

/// (weight, stderr) of the estimated atom nearest k0.
inline std::pair<double, double> bragg_weight(const EmpiricalSpectrum& e, std::span<const double> k0, double atom_tol) {
  const AtomEstimate* best = nullptr;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& a : e.atoms) {
    const double d = distance(a.k, k0);
    if (d < bd) {
      bd = d;
      best = &a;
    }
  }
  if (!best || bd > atom_tol) throw Error("bragg_weight: no estimate within atom_tol of k0");
  return {best->weight, best->stderr_};
}

// ---------------------------------------------------------------------------
// Exclusion zones around Bragg peaks
// ---------------------------------------------------------------------------

/// A grid point is excluded when it lies within `radius` of a model atom, or
/// when an atom's window sidelobe w/(π²Δ²L) there exceeds `leak_tol`.
struct ExclusionPolicy {
  double radius = 0.0;
  double leak_tol = 0.0;
  double window_length = 0.0;

  static ExclusionPolicy standard(const AveragingWindow& w) { return {3.0 / w.scale(), 0.0, 2.0 * w.scale()}; }
};

inline std::vector<bool> exclusion_mask(const std::vector<Vec>& grid, const SpectralModel& model,
                                        const ExclusionPolicy& pol) {
  double kmax = 0.0;
  for (const auto& k : grid) kmax = std::max(kmax, norm(k));
  const auto atoms = model.atoms_within(kmax + std::max(pol.radius, 1.0));
  std::vector<bool> out;
  out.reserve(grid.size());
  for (const auto& k : grid) {
    bool ex = model.is_singular(k, pol.radius);
    for (const auto& a : atoms) {
      if (ex) break;
      const double d = distance(a.k, k);
      if (d < pol.radius) ex = true;
      else if (pol.leak_tol > 0.0 &&
               std::abs(a.weight) / (std::numbers::pi * std::numbers::pi * d * d * pol.window_length) > pol.leak_tol)
        ex = true;
    }
    out.push_back(ex);
  }
  return out;
}

/// Mean band-averaged I at grid point k, which must be outside every exclusion zone.
inline std::pair<double, double> ac_density_estimate(const EmpiricalSpectrum& e, const SpectralModel& model,
                                                     std::span<const double> k, double pp_exclusion_radius) {
  std::size_t best = e.k_grid.size();
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < e.k_grid.size(); ++j) {
    const double d = distance(e.k_grid[j], k);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  if (best == e.k_grid.size() || bd > 1e-9) throw Error("ac_density_estimate: k is not a grid point");
  ExclusionPolicy pol{pp_exclusion_radius, 0.0, 2.0 * e.window_scale};
  if (exclusion_mask({e.k_grid[best]}, model, pol)[0])
    throw Error("ac_density_estimate: k lies inside a Bragg exclusion zone");
  return {e.intensity_mean[best], e.intensity_stderr[best]};
}

// ---------------------------------------------------------------------------
// Direct-space estimators
// ---------------------------------------------------------------------------

namespace detail {

/// Calls fn(i, j, dz) once per unordered pair i < j with |x_j − x_i|_∞ ≤ cutoff,
/// dz = x_j − x_i (minimum image when periodic on the window cube).
template <typename Fn>
void for_each_close_pair(const WeightedPointSet& ps, double cutoff, bool periodic, Fn&& fn) {
  const int d = ps.dim();
  const auto& w = ps.window();
  const Vec lo = w.lower();
  const double side = 2.0 * w.scale();
  const std::size_t n = ps.size();
  std::vector<long> ncell(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    long c = static_cast<long>(std::floor(side / cutoff));
    if (periodic && c < 3) c = 1;
    ncell[a] = std::clamp(c, 1L, 1L << 20);
  }
  long total = 1;
  for (long c : ncell) total *= c;
  std::vector<long> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = ps.point(i);
    long key = 0;
    for (int a = d - 1; a >= 0; --a) {
      long c = static_cast<long>(std::floor((x[a] - lo[a]) / side * static_cast<double>(ncell[a])));
      key = key * ncell[a] + std::clamp(c, 0L, ncell[a] - 1);
    }
    cell_of[i] = key;
  }
  std::vector<std::size_t> start(static_cast<std::size_t>(total) + 1, 0), order(n);
  for (std::size_t i = 0; i < n; ++i) ++start[cell_of[i] + 1];
  for (long c = 0; c < total; ++c) start[c + 1] += start[c];
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) order[fill[cell_of[i]]++] = i;
  }
  Vec dz(static_cast<std::size_t>(d));
  auto visit = [&](std::size_t i, std::size_t j) {
    const auto xi = ps.point(i), xj = ps.point(j);
    for (int a = 0; a < d; ++a) {
      double v = xj[a] - xi[a];
      if (periodic) v -= side * std::round(v / side);
      if (std::abs(v) > cutoff) return;
      dz[a] = v;
    }
    fn(i, j, std::span<const double>(dz));
  };
  std::vector<long> cc(static_cast<std::size_t>(d)), nb(static_cast<std::size_t>(d)), off(static_cast<std::size_t>(d));
  std::vector<long> neighbours;
  for (long c = 0; c < total; ++c) {
    if (start[c] == start[c + 1]) continue;
    long rem = c;
    for (int a = 0; a < d; ++a) {
      cc[a] = rem % ncell[a];
      rem /= ncell[a];
    }
    neighbours.clear();
    std::fill(off.begin(), off.end(), -1);
    while (true) {
      bool ok = true;
      long key = 0;
      for (int a = d - 1; a >= 0; --a) {
        long v = cc[a] + off[a];
        if (periodic) v = (v % ncell[a] + ncell[a]) % ncell[a];
        else if (v < 0 || v >= ncell[a]) ok = false;
        key = key * ncell[a] + v;
      }
      if (ok && key > c) neighbours.push_back(key);
      int a = 0;
      while (a < d && ++off[a] > 1) off[a++] = -1;
      if (a == d) break;
    }
    std::sort(neighbours.begin(), neighbours.end());
    neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());
    for (std::size_t p = start[c]; p < start[c + 1]; ++p) {
      for (std::size_t q = p + 1; q < start[c + 1]; ++q) visit(std::min(order[p], order[q]), std::max(order[p], order[q]));
      for (long nc : neighbours)
        for (std::size_t q = start[nc]; q < start[nc + 1]; ++q) visit(std::min(order[p], order[q]), std::max(order[p], order[q]));
    }
  }
}

}  // namespace detail

/// Difference-vector histogram on a d-dim grid of bins centred at j·bin_width,
/// |j_a| ≤ half_bins. Stored values are densities (mass / bin volume).
struct AcHistogram {
  int dim = 1;
  double bin_width = 1.0;
  int half_bins = 0;
  std::vector<cplx> density;
  std::vector<double> stderr_re;
  double atom0 = 0.0;
  double atom0_stderr = 0.0;
  std::size_t realisations = 1;

  AcHistogram() = default;
  AcHistogram(int d, double bw, int J)
      : dim(d), bin_width(bw), half_bins(J), density(static_cast<std::size_t>(std::pow(2 * J + 1, d)), 0.0),
        stderr_re(density.size(), 0.0) {}

  std::size_t side() const { return static_cast<std::size_t>(2 * half_bins + 1); }
  double bin_volume() const { return std::pow(bin_width, dim); }
  std::size_t index(std::span<const long> j) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * side() + static_cast<std::size_t>(j[a] + half_bins);
    return idx;
  }
  Vec center(std::size_t idx) const {
    Vec z(static_cast<std::size_t>(dim));
    for (int a = dim - 1; a >= 0; --a) {
      z[a] = (static_cast<long>(idx % side()) - half_bins) * bin_width;
      idx /= side();
    }
    return z;
  }
  /// Index of the bin reflected through the origin.
  std::size_t mirror(std::size_t idx) const { return density.size() - 1 - idx; }
  cplx mass(std::size_t idx) const { return density[idx] * bin_volume(); }
};

/// Naive in-window autocorrelation: every ordered pair x ≠ y contributes
/// w_x·conj(w_y) to the bin of x − y. Bins reach max_extent in each axis.
inline AcHistogram empirical_autocorr(const WeightedPointSet& ps, double bin_width,
                                      double max_extent = std::numeric_limits<double>::infinity()) {
  if (!(bin_width > 0.0)) throw Error("bin_width must be positive", "estimator.bin_width");
  const int d = ps.dim();
  if (!std::isfinite(max_extent)) {
    const double n = static_cast<double>(ps.size());
    if (n * n > 1e10) throw Error("empirical_autocorr: more than 1e10 pairs; pass a max_extent");
    max_extent = 2.0 * ps.window().scale();
  }
  const int J = static_cast<int>(std::ceil(max_extent / bin_width - 1e-12));
  AcHistogram h(d, bin_width, J);
  const double vol = ps.window().volume();
  std::vector<long> jj(static_cast<std::size_t>(d));
  const double cutoff = (J + 0.5) * bin_width;
  detail::for_each_close_pair(ps, cutoff, false, [&](std::size_t i, std::size_t j, std::span<const double> dz) {
    for (int a = 0; a < d; ++a) {
      jj[a] = std::lround(dz[a] / bin_width);
      if (std::labs(jj[a]) > J) return;
    }
    const std::size_t idx = h.index(jj);
    const cplx c = ps.weight(j) * std::conj(ps.weight(i));
    h.density[idx] += c;
    h.density[h.mirror(idx)] += std::conj(c);
  });
  const double norm_ = 1.0 / (vol * h.bin_volume());
  for (auto& v : h.density) v *= norm_;
  double s = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) s += std::norm(ps.weight(i));
  h.atom0 = s / vol;
  return h;
}

/// Mean over realisations with per-bin standard errors of the real part.
inline AcHistogram average_histograms(const std::vector<AcHistogram>& hs) {
  if (hs.empty()) throw Error("average_histograms: no histograms");
  AcHistogram out(hs[0].dim, hs[0].bin_width, hs[0].half_bins);
  std::vector<RunningStats> re(out.density.size());
  std::vector<double> im(out.density.size(), 0.0);
  RunningStats a0;
  for (const auto& h : hs) {
    for (std::size_t q = 0; q < re.size(); ++q) {
      re[q].add(h.density[q].real());
      im[q] += h.density[q].imag();
    }
    a0.add(h.atom0);
  }
  const double n = static_cast<double>(hs.size());
  for (std::size_t q = 0; q < re.size(); ++q) {
    out.density[q] = {re[q].mean(), im[q] / n};
    out.stderr_re[q] = re[q].stderr_();
  }
  out.atom0 = a0.mean();
  out.atom0_stderr = a0.stderr_();
  out.realisations = hs.size();
  return out;
}

/// Per-realisation Palm counts: neighbour differences y − x for centres x in
/// the window eroded by max_radius.
struct PalmSample {
  std::vector<double> counts;
  std::size_t centres = 0;
};

inline int palm_half_bins(double bin_width, double max_radius) {
  if (!(bin_width > 0.0) || !(max_radius > bin_width)) throw Error("palm_first_moment: need 0 < bin_width < max_radius");
  return std::max(0, static_cast<int>(std::floor(max_radius / bin_width - 0.5 + 1e-12)));
}

inline PalmSample palm_sample(const WeightedPointSet& ps, double bin_width, double max_radius) {
  const int d = ps.dim();
  const int J = palm_half_bins(bin_width, max_radius);
  const AcHistogram layout(d, bin_width, J);
  const auto inner = ps.window().resized(-max_radius);
  std::vector<char> is_centre(ps.size());
  PalmSample s;
  s.counts.assign(layout.density.size(), 0.0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    is_centre[i] = inner.contains(ps.point(i));
    s.centres += is_centre[i];
  }
  std::vector<long> jj(static_cast<std::size_t>(d)), mj(static_cast<std::size_t>(d));
  detail::for_each_close_pair(ps, (J + 0.5) * bin_width, false,
                              [&](std::size_t i, std::size_t j, std::span<const double> dz) {
                                for (int a = 0; a < d; ++a) {
                                  jj[a] = std::lround(dz[a] / bin_width);
                                  if (std::labs(jj[a]) > J) return;
                                  mj[a] = -jj[a];
                                }
                                if (is_centre[i]) s.counts[layout.index(jj)] += 1.0;
                                if (is_centre[j]) s.counts[layout.index(mj)] += 1.0;
                              });
  return s;
}

/// Pools Palm samples: total counts over total centres; stderr from the
/// per-realisation spread.
inline AcHistogram palm_merge(const std::vector<PalmSample>& samples, int dim, double bin_width, double max_radius) {
  AcHistogram pooled(dim, bin_width, palm_half_bins(bin_width, max_radius));
  std::vector<RunningStats> per(pooled.density.size());
  std::size_t centres_total = 0;
  for (const auto& s : samples) {
    for (std::size_t q = 0; q < s.counts.size(); ++q) {
      pooled.density[q] += s.counts[q];
      if (s.centres) per[q].add(s.counts[q] / (static_cast<double>(s.centres) * pooled.bin_volume()));
    }
    centres_total += s.centres;
  }
  if (centres_total == 0) throw Error("palm_first_moment: no points in the eroded window");
  for (std::size_t q = 0; q < pooled.density.size(); ++q) {
    pooled.density[q] /= static_cast<double>(centres_total) * pooled.bin_volume();
    pooled.stderr_re[q] = per[q].stderr_();
  }
  pooled.atom0 = 1.0;
  pooled.realisations = samples.size();
  return pooled;
}

/// Palm first moment: per centre x in the eroded window, the histogram of
/// y − x over the other points, normalised per centre.
inline AcHistogram palm_first_moment(const std::vector<WeightedPointSet>& realisations, double bin_width,
                                     double max_radius) {
  if (realisations.empty()) throw Error("palm_first_moment: no realisations");
  std::vector<PalmSample> samples;
  for (const auto& ps : realisations) samples.push_back(palm_sample(ps, bin_width, max_radius));
  return palm_merge(samples, realisations[0].dim(), bin_width, max_radius);
}

/// Radially binned pair density ρ²g(r) over shells [i·bw, (i+1)·bw).
struct RadialProfile {
  double bin_width = 1.0;
  std::vector<double> r_mid;
  std::vector<double> density;
  std::vector<double> stderr_;
  std::size_t realisations = 1;
};

enum class EdgeCorrection {
  translation,  ///< weight each pair by 1/vol(W ∩ (W + z)); cube windows
  periodic      ///< window is a torus; minimum-image distances
};

inline RadialProfile radial_pair_density(const WeightedPointSet& ps, double bin_width, double r_max,
                                         EdgeCorrection edge) {
  if (!(bin_width > 0.0) || !(r_max > 0.0)) throw Error("radial_pair_density: need positive bin_width and r_max");
  const auto& w = ps.window();
  if (w.kind() != WindowKind::cube) throw Error("radial_pair_density: cube window required");
  if (edge == EdgeCorrection::periodic && r_max > w.scale()) throw Error("radial_pair_density: r_max exceeds half the torus");
  const int d = ps.dim();
  const std::size_t nb = static_cast<std::size_t>(std::ceil(r_max / bin_width - 1e-12));
  RadialProfile p;
  p.bin_width = bin_width;
  std::vector<double> acc(nb, 0.0);
  const double vol = w.volume();
  detail::for_each_close_pair(ps, nb * bin_width, edge == EdgeCorrection::periodic,
                              [&](std::size_t i, std::size_t j, std::span<const double> dz) {
                                const double r = norm(dz);
                                const auto b = static_cast<std::size_t>(r / bin_width);
                                if (b >= nb) return;
                                const double c = (ps.weight(j) * std::conj(ps.weight(i))).real();
                                const double v = edge == EdgeCorrection::periodic ? vol : w.overlap_volume(dz);
                                acc[b] += 2.0 * c / v;
                              });
  const double vb = unit_ball_volume(d);
  for (std::size_t b = 0; b < nb; ++b) {
    const double r0 = b * bin_width, r1 = (b + 1) * bin_width;
    p.r_mid.push_back(0.5 * (r0 + r1));
    p.density.push_back(acc[b] / (vb * (std::pow(r1, d) - std::pow(r0, d))));
  }
  p.stderr_.assign(nb, 0.0);
  return p;
}

inline RadialProfile average_profiles(const std::vector<RadialProfile>& ps) {
  if (ps.empty()) throw Error("average_profiles: no profiles");
  RadialProfile out = ps[0];
  std::vector<RunningStats> st(out.density.size());
  for (const auto& p : ps)
    for (std::size_t b = 0; b < st.size(); ++b) st[b].add(p.density[b]);
  for (std::size_t b = 0; b < st.size(); ++b) {
    out.density[b] = st[b].mean();
    out.stderr_[b] = st[b].stderr_();
  }
  out.realisations = ps.size();
  return out;
}

// ---------------------------------------------------------------------------
// Bartlett spectrum and comparison
// ---------------------------------------------------------------------------

/// Γ = γ̂ − ρ²δ_0.
inline SpectralModel bartlett(const SpectralModel& model, double rho) {
  const double r2 = rho * rho;
  double w0 = 0.0;
  for (const auto& a : model.atoms_within(0.0))
    if (norm(a.k) == 0.0) w0 += a.weight;
  if (w0 < r2 * (1.0 - 1e-12)) throw Error("bartlett: atom at 0 is lighter than rho^2");
  SpectralModel m = model;
  m.label = "Bartlett(" + model.label + ")";
  auto inner = model.atoms_within;
  m.atoms_within = [inner, r2](double r) {
    std::vector<Atom> out;
    for (auto a : inner(r)) {
      if (norm(a.k) == 0.0) {
        a.weight -= r2;
        if (std::abs(a.weight) <= 1e-12 * r2) continue;
      }
      out.push_back(std::move(a));
    }
    return out;
  };
  return m;
}

struct Check {
  std::string name;
  double value;
  double threshold;
  bool pass;
};

struct AtomComparison {
  Vec k;
  double estimate;
  double stderr_;
  double model;
  double rel_error;  ///< NaN when the model weight is 0
  double z;
};

struct ComparisonReport {
  std::vector<AtomComparison> atoms;
  std::vector<double> density_model;
  std::vector<bool> excluded;
  std::size_t compared_points = 0;
  double density_mean_rel = 0.0;
  double density_l1_rel = 0.0;
  double density_linf_rel = 0.0;
  double density_level_rel = 0.0;
  double density_max_abs_z = 0.0;
  double atom_max_rel = 0.0;
  double atom_null_max_z = 0.0;
  std::size_t unexplained_peaks = 0;
  std::vector<Vec> unexplained_k;
  std::vector<Check> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  void add_check(std::string name, double value, double threshold) {
    checks.push_back({std::move(name), value, threshold, value <= threshold});
  }
};

/// Thresholds keyed by metric name; only the listed metrics are checked.
using Tolerances = std::map<std::string, double>;

inline const std::vector<std::string>& spectral_metric_names() {
  static const std::vector<std::string> names{"density_mean_rel",  "density_l1_rel", "density_linf_rel",
                                              "density_level_rel", "atom_rel",       "atom_null_z",
                                              "unexplained_peaks"};
  return names;
}

inline ComparisonReport compare(const EmpiricalSpectrum& emp, const SpectralModel& model, const Tolerances& tol,
                                const ExclusionPolicy& pol, double atom_tol = 1e-9) {
  ComparisonReport rep;
  rep.excluded = exclusion_mask(emp.k_grid, model, pol);
  double sum_abs = 0.0, sum_model = 0.0, sum_rel = 0.0, sum_est = 0.0;
  for (std::size_t j = 0; j < emp.k_grid.size(); ++j) {
    const double m = model.density(emp.k_grid[j]);
    rep.density_model.push_back(m);
    if (rep.excluded[j] || !std::isfinite(m)) continue;
    const double e = emp.intensity_mean[j];
    const double diff = std::abs(e - m);
    sum_abs += diff;
    sum_model += std::abs(m);
    sum_est += e;
    const double rel = m != 0.0 ? diff / std::abs(m) : diff;
    sum_rel += rel;
    rep.density_linf_rel = std::max(rep.density_linf_rel, rel);
    if (emp.intensity_stderr[j] > 0.0) rep.density_max_abs_z = std::max(rep.density_max_abs_z, diff / emp.intensity_stderr[j]);
    ++rep.compared_points;
  }
  if (rep.compared_points) {
    rep.density_mean_rel = sum_rel / static_cast<double>(rep.compared_points);
    rep.density_l1_rel = sum_model > 0.0 ? sum_abs / sum_model : sum_abs;
    rep.density_level_rel = sum_model > 0.0 ? std::abs(sum_est - sum_model) / sum_model : std::abs(sum_est);
  }
  for (const auto& a : emp.atoms) {
    const double w = spectral_eval(model, a.k, atom_tol).pp_weight;
    const double z = a.stderr_ > 0.0 ? (a.weight - w) / a.stderr_ : (a.weight == w ? 0.0 : std::copysign(INFINITY, a.weight - w));
    const double rel = w != 0.0 ? std::abs(a.weight - w) / std::abs(w) : std::numeric_limits<double>::quiet_NaN();
    rep.atoms.push_back({a.k, a.weight, a.stderr_, w, rel, z});
    if (w != 0.0) rep.atom_max_rel = std::max(rep.atom_max_rel, rel);
    else rep.atom_null_max_z = std::max(rep.atom_null_max_z, std::abs(z));
  }
  for (std::size_t j = 0; j < emp.scan_mean.size(); ++j) {
    if (rep.excluded[j]) continue;
    if (emp.scan_mean[j] > 5.0 * emp.scan_stderr[j]) {
      ++rep.unexplained_peaks;
      rep.unexplained_k.push_back(emp.k_grid[j]);
    }
  }
  for (const auto& [name, threshold] : tol) {
    if (name == "density_mean_rel") rep.add_check(name, rep.density_mean_rel, threshold);
    else if (name == "density_l1_rel") rep.add_check(name, rep.density_l1_rel, threshold);
    else if (name == "density_linf_rel") rep.add_check(name, rep.density_linf_rel, threshold);
    else if (name == "density_level_rel") rep.add_check(name, rep.density_level_rel, threshold);
    else if (name == "atom_rel") rep.add_check(name, rep.atom_max_rel, threshold);
    else if (name == "atom_null_z") rep.add_check(name, rep.atom_null_max_z, threshold);
    else if (name == "unexplained_peaks") rep.add_check(name, static_cast<double>(rep.unexplained_peaks), threshold);
  }
  return rep;
}

}  // namespace ppdiff
