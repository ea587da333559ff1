#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include "branching.hpp"
#include "charfun.hpp"
#include "clusters.hpp"
#include "parallel.hpp"
#include "processes.hpp"
#include "renewal.hpp"
#include "rng.hpp"
#include "spectral.hpp"

#ifndef PPDIFF_GIT_DESCRIBE
#define PPDIFF_GIT_DESCRIBE "unknown"
#endif

namespace ppdiff {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace cfg {

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw Error("missing required field", path + "." + key);
  return j.at(key);
}

inline double num(const json& j, const std::string& key, const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_number()) throw Error("expected a number", path + "." + key);
  return v.get<double>();
}

inline double num_or(const json& j, const std::string& key, double def, const std::string& path) {
  if (!j.contains(key)) return def;
  return num(j, key, path);
}

inline int integer(const json& j, const std::string& key, const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_number_integer()) throw Error("expected an integer", path + "." + key);
  return v.get<int>();
}

inline std::string str(const json& j, const std::string& key, const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_string()) throw Error("expected a string", path + "." + key);
  return v.get<std::string>();
}

inline Vec vec(const json& v, const std::string& path) {
  if (!v.is_array()) throw Error("expected an array of numbers", path);
  Vec out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error("expected an array of numbers", path);
    out.push_back(x.get<double>());
  }
  return out;
}

inline cplx complex_value(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  throw Error("expected a number or [re, im]", path);
}

inline std::optional<Rational> rational(const json& v) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (!v.is_string()) return std::nullopt;
  const auto s = v.get<std::string>();
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  } catch (const std::logic_error&) {
    return std::nullopt;
  }
}

/// A number, or a rational given as "p/q".
inline double real_or_rational(const json& j, const std::string& key, const std::string& path) {
  const auto& v = need(j, key, path);
  if (v.is_number()) return v.get<double>();
  if (auto r = rational(v)) return r->value();
  throw Error("expected a number or a rational \"p/q\"", path + "." + key);
}

template <typename Fn>
auto with_prefix(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.what(), path);
  }
}

inline InterArrivalLaw parse_law(const json& j, const std::string& path) {
  const auto type = str(j, "type", path);
  return with_prefix(path, [&]() -> InterArrivalLaw {
    if (type == "exponential") return InterArrivalLaw::exponential();
    if (type == "gamma") return InterArrivalLaw::gamma(num(j, "alpha", path));
    if (type == "deterministic") return InterArrivalLaw::deterministic(num_or(j, "a", 1.0, path));
    if (type == "two_atom") {
      const double p = real_or_rational(j, "p", path);
      if (j.contains("b_over_a")) {
        const double r = num(j, "b_over_a", path);
        if (!(r > 0.0)) throw Error("b_over_a must be positive", path + ".b_over_a");
        const double a = 1.0 / (p + (1.0 - p) * r);
        return InterArrivalLaw::two_atom(a, r * a, p);
      }
      const auto ra = rational(need(j, "a", path)), rb = rational(need(j, "b", path)), rp = rational(need(j, "p", path));
      if (ra && rb && rp) return InterArrivalLaw::two_atom(*ra, *rb, *rp);
      return InterArrivalLaw::two_atom(real_or_rational(j, "a", path), real_or_rational(j, "b", path), p);
    }
    if (type == "finite_atoms") {
      const auto& a = need(j, "atoms", path);
      const auto& p = need(j, "probs", path);
      if (!a.is_array() || !p.is_array()) throw Error("atoms and probs must be arrays", path);
      std::vector<Rational> ra, rp;
      bool exact = true;
      for (const auto& v : a) {
        auto r = rational(v);
        exact = exact && r;
        if (r) ra.push_back(*r);
      }
      for (const auto& v : p) {
        auto r = rational(v);
        exact = exact && r;
        if (r) rp.push_back(*r);
      }
      if (exact) return InterArrivalLaw::finite_atoms(ra, rp);
      return InterArrivalLaw::finite_atoms(vec(a, path + ".atoms"), vec(p, path + ".probs"));
    }
    throw Error("unknown inter-arrival law '" + type + "'", "type");
  });
}

inline Displacement parse_displacement(const json& j, const std::string& path) {
  const auto type = str(j, "type", path);
  if (type == "gaussian") {
    const double s = num(j, "sigma", path);
    if (!(s > 0.0)) throw Error("sigma must be positive", path + ".sigma");
    return GaussianDisplacement{s};
  }
  if (type == "uniform") {
    const double a = num(j, "a", path);
    if (!(a > 0.0)) throw Error("a must be positive", path + ".a");
    return UniformDisplacement{a};
  }
  throw Error("unknown displacement law '" + type + "'", path + ".type");
}

inline ClusterLaw parse_cluster(const json& j, int dim) {
  const std::string path = "cluster";
  const auto type = str(j, "type", path);
  ClusterLaw law;
  if (type == "bernoulli") {
    law = RandomWeight::bernoulli(num(j, "p", path));
  } else if (type == "random_weight") {
    RandomWeight rw;
    const auto& vals = need(j, "values", path);
    if (!vals.is_array()) throw Error("expected an array", path + ".values");
    for (const auto& v : vals) rw.values.push_back(complex_value(v, path + ".values"));
    rw.probs = vec(need(j, "probs", path), path + ".probs");
    law = rw;
  } else if (type == "displacement") {
    law = RandomDisplacement{parse_displacement(need(j, "law", path), path + ".law")};
  } else if (type == "neyman_scott") {
    law = NeymanScott{vec(need(j, "k_probs", path), path + ".k_probs"), parse_displacement(need(j, "law", path), path + ".law")};
  } else if (type == "signed") {
    law = SignedBernoulli{num(j, "p", path)};
  } else if (type == "deterministic") {
    FiniteCluster c;
    const auto& pts = need(j, "points", path);
    if (!pts.is_array() || pts.empty()) throw Error("expected a non-empty array", path + ".points");
    for (const auto& p : pts) {
      Vec off = vec(need(p, "offset", path + ".points"), path + ".points.offset");
      if (static_cast<int>(off.size()) != dim) throw Error("offset dimension differs from the process", path + ".points.offset");
      c.points.push_back({off, complex_value(need(p, "weight", path + ".points"), path + ".points.weight")});
    }
    law = DeterministicCluster{c};
  } else {
    throw Error("unknown cluster variant '" + type + "'", path + ".type");
  }
  validate_cluster_law(law);
  return law;
}

inline Profile parse_profile(const json& j, const std::string& path) {
  const auto type = str(j, "type", path);
  if (type == "constant") return Profile::constant(num_or(j, "value", 1.0, path));
  if (type == "tent") return Profile::tent(num(j, "center", path), num(j, "half_width", path));
  throw Error("unknown profile '" + type + "'", path + ".type");
}

}  // namespace cfg

struct RenewalSpec {
  InterArrivalLaw law;
};
struct FibonacciCombSpec {
  FibonacciGas gas;
};
struct BranchingSpec {
  BranchingConfig cfg;
};

using ProcessSpec = std::variant<BranchingSpec, RenewalSpec, CentreProcess, FibonacciCombSpec>;

enum class AutocorrMode { none, naive, palm, radial, torus };

struct AutocorrSpec {
  AutocorrMode mode = AutocorrMode::none;
  double bin_width = 0.1;
  double max_extent = 5.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

struct Scenario {
  std::string name;
  json raw;
  ProcessSpec process;
  std::optional<ClusterLaw> cluster;
  AveragingWindow window = AveragingWindow::cube(1.0, 1);
  int dim = 1;

  Vec k_origin, k_step;
  std::size_t k_count = 0;
  int band_half = 4;
  bool scan = false;
  std::vector<Vec> atom_k;
  int strongest_atoms = 0;
  double strongest_k_max = 0.0;
  double exclusion_radius = 0.0;
  double leak_tol = 0.0;
  double k_star_cutoff = 40.0;
  std::optional<double> periodicity_shift;
  AutocorrSpec autocorr;

  Tolerances tolerances;
  std::size_t realisations = 200;
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& scenario_metric_names() {
  static const std::vector<std::string> names{"autocorr_mean_rel", "autocorr_max_rel",  "autocorr_excess_mean_rel",
                                              "autocorr_atom_rel", "intensity_rel",     "count_z",
                                              "min_distance_violations", "periodicity_z2"};
  return names;
}

inline Scenario parse_scenario(const json& j) {
  Scenario s;
  s.raw = j;
  if (!j.is_object()) throw Error("config must be a JSON object");
  s.name = j.contains("name") ? cfg::str(j, "name", "") : "scenario";
  if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(cfg::integer(j, "seed", ""));
  if (j.contains("realisations")) {
    const int r = cfg::integer(j, "realisations", "");
    if (r < 1) throw Error("must be at least 1", "realisations");
    s.realisations = static_cast<std::size_t>(r);
  }

  const auto& p = cfg::need(j, "process", "");
  const std::string pp = "process";
  const auto type = cfg::str(p, "type", pp);
  if (type == "renewal") {
    s.process = RenewalSpec{cfg::parse_law(cfg::need(p, "law", pp), pp + ".law")};
    s.dim = 1;
  } else if (type == "poisson") {
    const double rho = cfg::num(p, "rho", pp);
    if (!(rho > 0.0)) throw Error("intensity must be positive", pp + ".rho");
    s.dim = cfg::integer(p, "dim", pp);
    s.process = CentreProcess{PoissonProcess{rho, s.dim}};
  } else if (type == "lattice") {
    const double b = cfg::num(p, "b", pp);
    if (!(b > 0.0)) throw Error("spacing must be positive", pp + ".b");
    s.dim = cfg::integer(p, "dim", pp);
    const bool offset = p.contains("random_offset") && p.at("random_offset").get<bool>();
    s.process = CentreProcess{LatticeProcess{b, s.dim, offset}};
  } else if (type == "matern") {
    const double rho = cfg::num(p, "rho", pp), R = cfg::num(p, "R", pp);
    if (!(rho > 0.0)) throw Error("intensity must be positive", pp + ".rho");
    if (!(R > 0.0)) throw Error("hard-core radius must be positive", pp + ".R");
    s.dim = cfg::integer(p, "dim", pp);
    s.process = CentreProcess{MaternProcess{rho, R, s.dim}};
  } else if (type == "fibonacci_gas" || type == "fibonacci_comb") {
    FibonacciGas g{cfg::num(p, "window_center", pp), cfg::num(p, "window_halfwidth", pp),
                   cfg::parse_profile(cfg::need(p, "profile", pp), pp + ".profile")};
    if (!(g.window_halfwidth > 0.0)) throw Error("window half-width must be positive", pp + ".window_halfwidth");
    s.dim = 1;
    if (type == "fibonacci_gas") s.process = CentreProcess{g};
    else s.process = FibonacciCombSpec{g};
  } else if (type == "cbbm") {
    BranchingConfig c;
    c.rho = cfg::num(p, "rho", pp);
    c.V = cfg::num(p, "V", pp);
    c.dim = cfg::integer(p, "dim", pp);
    c.T = cfg::num(p, "T", pp);
    c.box_halfwidth = cfg::num(p, "box_halfwidth", pp);
    c.inner_halfwidth = cfg::num(p, "inner_halfwidth", pp);
    c.validate();
    s.dim = c.dim;
    s.process = BranchingSpec{c};
  } else {
    throw Error("unknown process variant '" + type + "'", pp + ".type");
  }
  if (s.dim < 1) throw Error("dimension must be positive", pp + ".dim");

  if (j.contains("cluster")) {
    if (std::holds_alternative<BranchingSpec>(s.process) || std::holds_alternative<FibonacciCombSpec>(s.process))
      throw Error("clusters are not supported on this process", "cluster");
    s.cluster = cfg::parse_cluster(j.at("cluster"), s.dim);
  }

  if (const auto* b = std::get_if<BranchingSpec>(&s.process)) {
    s.window = AveragingWindow::cube(b->cfg.inner_halfwidth, s.dim);
    if (j.contains("window")) throw Error("the branching process uses its inner window", "window");
  } else {
    const auto& w = cfg::need(j, "window", "");
    const auto kind = w.contains("kind") ? cfg::str(w, "kind", "window") : std::string("cube");
    const double hw = cfg::num(w, "half_width", "window");
    Vec centre = w.contains("center") ? cfg::vec(w.at("center"), "window.center") : Vec(static_cast<std::size_t>(s.dim), 0.0);
    if (static_cast<int>(centre.size()) != s.dim) throw Error("center dimension differs from the process", "window.center");
    if (kind == "cube") s.window = AveragingWindow::cube(hw, s.dim, centre);
    else if (kind == "ball") s.window = AveragingWindow::ball(hw, s.dim, centre);
    else throw Error("unknown window kind '" + kind + "'", "window.kind");
  }

  const json est = j.contains("estimator") ? j.at("estimator") : json::object();
  const std::string ep = "estimator";
  if (est.contains("k_count")) {
    const int kc = cfg::integer(est, "k_count", ep);
    if (kc < 0) throw Error("must be non-negative", ep + ".k_count");
    s.k_count = static_cast<std::size_t>(kc);
  }
  if (s.k_count > 0) {
    s.k_origin = cfg::vec(cfg::need(est, "k_origin", ep), ep + ".k_origin");
    s.k_step = cfg::vec(cfg::need(est, "k_step", ep), ep + ".k_step");
    if (static_cast<int>(s.k_origin.size()) != s.dim || static_cast<int>(s.k_step.size()) != s.dim)
      throw Error("k vectors must match the process dimension", ep + ".k_origin");
  }
  if (est.contains("band_half")) s.band_half = cfg::integer(est, "band_half", ep);
  if (s.band_half < 0) throw Error("must be non-negative", ep + ".band_half");
  if (est.contains("scan")) s.scan = est.at("scan").get<bool>();
  if (est.contains("atoms")) {
    const auto& a = est.at("atoms");
    if (a.is_object()) {
      s.strongest_atoms = cfg::integer(a, "strongest", ep + ".atoms");
      s.strongest_k_max = cfg::num(a, "k_max", ep + ".atoms");
    } else {
      if (!a.is_array()) throw Error("expected a list of k vectors", ep + ".atoms");
      for (const auto& k : a) {
        Vec kv = cfg::vec(k, ep + ".atoms");
        if (static_cast<int>(kv.size()) != s.dim) throw Error("atom position has wrong dimension", ep + ".atoms");
        s.atom_k.push_back(std::move(kv));
      }
    }
  }
  s.exclusion_radius = cfg::num_or(est, "exclusion_radius", 3.0 / s.window.scale(), ep);
  s.leak_tol = cfg::num_or(est, "leak_tol", 0.0, ep);
  s.k_star_cutoff = cfg::num_or(est, "k_star_cutoff", 40.0, ep);
  if (est.contains("periodicity_shift")) s.periodicity_shift = cfg::num(est, "periodicity_shift", ep);
  if (est.contains("autocorr")) {
    const auto& a = est.at("autocorr");
    const std::string ap = ep + ".autocorr";
    const auto mode = cfg::str(a, "mode", ap);
    if (mode == "naive") s.autocorr.mode = AutocorrMode::naive;
    else if (mode == "palm") s.autocorr.mode = AutocorrMode::palm;
    else if (mode == "radial") s.autocorr.mode = AutocorrMode::radial;
    else if (mode == "torus") s.autocorr.mode = AutocorrMode::torus;
    else throw Error("unknown autocorrelation mode '" + mode + "'", ap + ".mode");
    if (s.autocorr.mode == AutocorrMode::torus && !std::holds_alternative<BranchingSpec>(s.process))
      throw Error("torus mode needs the branching process", ap + ".mode");
    if (s.autocorr.mode == AutocorrMode::radial && s.window.kind() != WindowKind::cube)
      throw Error("radial mode needs a cube window", ap + ".mode");
    s.autocorr.bin_width = cfg::num(a, "bin_width", ap);
    s.autocorr.max_extent = cfg::num(a, "max_extent", ap);
    if (!(s.autocorr.bin_width > 0.0)) throw Error("must be positive", ap + ".bin_width");
    if (!(s.autocorr.max_extent > s.autocorr.bin_width)) throw Error("must exceed bin_width", ap + ".max_extent");
    s.autocorr.r_min = cfg::num_or(a, "r_min", s.autocorr.bin_width, ap);
    s.autocorr.r_max = cfg::num_or(a, "r_max", s.autocorr.max_extent, ap);
  }

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (!t.is_object()) throw Error("expected an object", "tolerances");
    for (const auto& [k, v] : t.items()) {
      const auto& a = spectral_metric_names();
      const auto& b = scenario_metric_names();
      if (std::find(a.begin(), a.end(), k) == a.end() && std::find(b.begin(), b.end(), k) == b.end())
        throw Error("unknown tolerance metric '" + k + "'", "tolerances." + k);
      if (!v.is_number()) throw Error("expected a number", "tolerances." + k);
      s.tolerances[k] = v.get<double>();
    }
  }
  auto needs = [&](const char* metric, bool ok, const char* why) {
    if (s.tolerances.count(metric) && !ok) throw Error(why, std::string("tolerances.") + metric);
  };
  const bool has_ac = s.autocorr.mode != AutocorrMode::none;
  needs("autocorr_mean_rel", has_ac, "needs estimator.autocorr");
  needs("autocorr_max_rel", has_ac, "needs estimator.autocorr");
  needs("autocorr_excess_mean_rel", has_ac, "needs estimator.autocorr");
  needs("autocorr_atom_rel", has_ac, "needs estimator.autocorr");
  needs("count_z", std::holds_alternative<BranchingSpec>(s.process), "only defined for the branching process");
  needs("periodicity_z2", s.periodicity_shift.has_value() && s.k_count > 0, "needs estimator.periodicity_shift and a k grid");
  needs("unexplained_peaks", s.scan, "needs estimator.scan");
  needs("min_distance_violations",
        std::holds_alternative<CentreProcess>(s.process) &&
            std::holds_alternative<MaternProcess>(std::get<CentreProcess>(s.process)) && !s.cluster,
        "only defined for the Matérn process");
  needs("intensity_rel", !s.cluster, "not defined with a cluster");
  return s;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Intensity of the observed (undecorated) process.
inline double scenario_intensity(const Scenario& s) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RenewalSpec>) return 1.0;
        else if constexpr (std::is_same_v<T, CentreProcess>) return process_intensity(v);
        else if constexpr (std::is_same_v<T, FibonacciCombSpec>) return fibonacci_density(v.gas);
        else return v.cfg.rho;
      },
      s.process);
}

inline double max_probe_k(const Scenario& s) {
  double kmax = s.strongest_k_max;
  for (std::size_t j = 0; j < s.k_count; ++j) {
    Vec k(s.k_origin);
    for (std::size_t c = 0; c < k.size(); ++c) k[c] += static_cast<double>(j) * s.k_step[c];
    kmax = std::max(kmax, norm(k));
  }
  for (const auto& k : s.atom_k) kmax = std::max(kmax, norm(k));
  return kmax + 1.0;
}

inline SpectralModel scenario_model(const Scenario& s) {
  ModelOptions opt{max_probe_k(s), s.k_star_cutoff};
  SpectralModel base = std::visit(
      [&](const auto& v) -> SpectralModel {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RenewalSpec>) {
          return analytic_renewal_model(v.law);
        } else if constexpr (std::is_same_v<T, CentreProcess>) {
          return analytic_centre_model(v, opt);
        } else if constexpr (std::is_same_v<T, FibonacciCombSpec>) {
          auto m = analytic_centre_model(CentreProcess{v.gas}, opt);
          m.label = "fibonacci_comb";
          m.density = [](std::span<const double>) { return 0.0; };
          return m;
        } else {
          return analytic_cbbm_model(v.cfg.rho, v.cfg.V, v.cfg.dim, 2.0);
        }
      },
      s.process);
  if (!s.cluster) return base;
  bool comb = false;
  if (const auto* c = std::get_if<CentreProcess>(&s.process))
    if (const auto* l = std::get_if<LatticeProcess>(c)) comb = !l->random_offset;
  return compound_model(base, scenario_intensity(s), *s.cluster,
                        comb ? CentreKind::deterministic_comb : CentreKind::random_process);
}

/// Off-origin density of the autocorrelation γ (pair density) as a function of
/// |z|, with its large-|z| background and the atom at 0. NaN where unmodelled.
struct DirectSpaceModel {
  std::function<double(double)> density;
  double background;
  double atom0;
};

inline std::optional<DirectSpaceModel> direct_space_model(const Scenario& s) {
  if (s.cluster) return std::nullopt;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (const auto* r = std::get_if<RenewalSpec>(&s.process)) {
    const auto law = r->law;
    if (law.kind() == InterArrivalLaw::Kind::exponential) return DirectSpaceModel{[](double) { return 1.0; }, 1.0, 1.0};
    if (law.kind() == InterArrivalLaw::Kind::gamma)
      return DirectSpaceModel{[law](double x) { return g_alpha(law.alpha(), x); }, 1.0, 1.0};
    return std::nullopt;
  }
  if (const auto* b = std::get_if<BranchingSpec>(&s.process)) {
    const auto c = b->cfg;
    return DirectSpaceModel{[c](double r) { return c.rho * (c.rho + cbbm_f(c.V, c.dim, c.T, r)); }, c.rho * c.rho, c.rho};
  }
  if (const auto* cp = std::get_if<CentreProcess>(&s.process)) {
    if (const auto* p = std::get_if<PoissonProcess>(cp)) {
      const double r2 = p->rho * p->rho;
      return DirectSpaceModel{[r2](double) { return r2; }, r2, p->rho};
    }
    if (const auto* m = std::get_if<MaternProcess>(cp)) {
      const double re = matern_effective_density(*m), R = m->R;
      return DirectSpaceModel{[re, R, nan](double r) { return r >= 2.0 * R ? re * re : (r < R ? 0.0 : nan); }, re * re, re};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Realisations
// ---------------------------------------------------------------------------

struct Realisation {
  WeightedPointSet points;
  std::optional<WeightedPointSet> torus;
  std::size_t box_count = 0;
};

inline Realisation realise(const Scenario& s, std::size_t i) {
  return std::visit(
      [&](const auto& v) -> Realisation {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BranchingSpec>) {
          RngStream rng(s.seed, i, Purpose::branching);
          auto r = simulate_cbbm(v.cfg, rng);
          return {std::move(r.inner), std::move(r.box), r.box_count};
        } else if constexpr (std::is_same_v<T, FibonacciCombSpec>) {
          const double lo = s.window.center()[0] - s.window.scale(), hi = s.window.center()[0] + s.window.scale();
          auto comb = fibonacci_weighted_comb(v.gas, lo, hi);
          WeightedPointSet ps(s.window);
          for (std::size_t q = 0; q < comb.size(); ++q) ps.add_if_inside(comb.point(q), comb.weight(q));
          return {std::move(ps), std::nullopt, 0};
        } else {
          const double reach = s.cluster ? cluster_reach(*s.cluster, s.dim) : 0.0;
          const AveragingWindow centre_window = reach > 0.0 ? s.window.resized(reach) : s.window;
          WeightedPointSet centres(centre_window);
          if constexpr (std::is_same_v<T, RenewalSpec>) {
            RngStream rng(s.seed, i, Purpose::renewal);
            const double lo = centre_window.center()[0] - centre_window.scale();
            const auto raw = simulate_renewal(v.law, 2.0 * centre_window.scale(), rng);
            for (std::size_t q = 0; q < raw.size(); ++q) {
              const double x[1] = {raw.point(q)[0] + lo};
              centres.add_if_inside(x);
            }
          } else {
            RngStream rng(s.seed, i, Purpose::centres);
            centres = sample_centre(v, centre_window, rng);
          }
          if (!s.cluster) return {std::move(centres), std::nullopt, 0};
          RngStream crng(s.seed, i, Purpose::clusters);
          return {sample_compound(centres, *s.cluster, crng, s.window), std::nullopt, 0};
        }
      },
      s.process);
}

inline double min_pair_distance(const WeightedPointSet& ps, double cutoff) {
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_close_pair(ps, cutoff, false,
                              [&](std::size_t, std::size_t, std::span<const double> dz) { best = std::min(best, norm(dz)); });
  return best;
}

struct RealisationOutput {
  SpectrumSample spectrum;
  std::optional<AcHistogram> naive;
  std::optional<PalmSample> palm;
  std::optional<RadialProfile> radial;
  double intensity = 0.0;
  double box_count = 0.0;
  double min_distance = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Running a scenario
// ---------------------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realisations;
  unsigned threads = 1;
  std::optional<std::filesystem::path> out;
};

struct AutocorrRow {
  double z, re, im, stderr_;
};

struct ScenarioResult {
  std::string name;
  EmpiricalSpectrum spectrum;
  ComparisonReport report;
  std::vector<AutocorrRow> autocorr;
  double autocorr_atom0 = 0.0;
  json report_json;
  std::map<std::string, double> metrics;
  int exit_code = 0;
};

namespace detail {

/// Shell average of f over [r0, r1) with weight r^{d−1}.
inline double shell_average(const std::function<double(double)>& f, double r0, double r1, int d) {
  auto num = [&](double r) { return f(r) * std::pow(r, d - 1); };
  auto den = [&](double r) { return std::pow(r, d - 1); };
  return boost::math::quadrature::gauss<double, 10>::integrate(num, r0, r1) /
         boost::math::quadrature::gauss<double, 10>::integrate(den, r0, r1);
}

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline ScenarioResult run_scenario(const Scenario& s_in, const RunOptions& opt) {
  Scenario s = s_in;
  if (opt.seed) s.seed = *opt.seed;
  if (opt.realisations) s.realisations = *opt.realisations;
  const SpectralModel model = scenario_model(s);

  if (s.strongest_atoms > 0) {
    auto atoms = model.atoms_within(s.strongest_k_max);
    std::erase_if(atoms, [](const Atom& a) { return a.k[0] < 0.0; });
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.weight > b.weight; });
    for (std::size_t q = 0; q < atoms.size() && q < static_cast<std::size_t>(s.strongest_atoms); ++q)
      s.atom_k.push_back(atoms[q].k);
  }

  const SpectrumPlan plan = s.k_count > 0 || !s.atom_k.empty()
                                ? SpectrumPlan::make(s.window, s.k_count ? s.k_origin : Vec(s.dim, 0.0),
                                                     s.k_count ? s.k_step : Vec(s.dim, 0.0), s.k_count, s.band_half,
                                                     s.scan, s.atom_k)
                                : SpectrumPlan{};
  const bool want_spectrum = s.k_count > 0 || !s.atom_k.empty();
  const auto& ac = s.autocorr;

  auto outputs = parallel_map(s.realisations, opt.threads, [&](std::size_t i) {
    Realisation r = realise(s, i);
    RealisationOutput o;
    if (want_spectrum) o.spectrum = sample_spectrum(r.points, plan);
    switch (ac.mode) {
      case AutocorrMode::naive:
        o.naive = empirical_autocorr(r.points, ac.bin_width, ac.max_extent);
        break;
      case AutocorrMode::palm:
        o.palm = palm_sample(r.points, ac.bin_width, ac.max_extent);
        break;
      case AutocorrMode::radial:
        o.radial = radial_pair_density(r.points, ac.bin_width, ac.max_extent, EdgeCorrection::translation);
        break;
      case AutocorrMode::torus:
        o.radial = radial_pair_density(*r.torus, ac.bin_width, ac.max_extent, EdgeCorrection::periodic);
        break;
      case AutocorrMode::none:
        break;
    }
    o.intensity = static_cast<double>(r.points.size()) / r.points.window().volume();
    o.box_count = static_cast<double>(r.box_count);
    if (s.tolerances.count("min_distance_violations")) {
      const auto& m = std::get<MaternProcess>(std::get<CentreProcess>(s.process));
      o.min_distance = min_pair_distance(r.points, m.R);
    }
    return o;
  });

  ScenarioResult res;
  res.name = s.name;
  std::vector<SpectrumSample> samples;
  for (auto& o : outputs) samples.push_back(std::move(o.spectrum));
  if (want_spectrum) res.spectrum = merge_spectrum(samples, plan, s.window);

  const ExclusionPolicy pol{s.exclusion_radius, s.leak_tol, 2.0 * s.window.scale()};
  Tolerances spectral_tol;
  for (const auto& [k, v] : s.tolerances)
    if (std::find(spectral_metric_names().begin(), spectral_metric_names().end(), k) != spectral_metric_names().end())
      spectral_tol[k] = v;
  res.report = compare(res.spectrum, model, spectral_tol, pol, 1e-9);
  auto& metrics = res.metrics;
  const auto& rep = res.report;
  if (want_spectrum) {
    metrics["density_mean_rel"] = rep.density_mean_rel;
    metrics["density_l1_rel"] = rep.density_l1_rel;
    metrics["density_linf_rel"] = rep.density_linf_rel;
    metrics["density_level_rel"] = rep.density_level_rel;
    metrics["atom_rel"] = rep.atom_max_rel;
    metrics["atom_null_z"] = rep.atom_null_max_z;
    if (s.scan) metrics["unexplained_peaks"] = static_cast<double>(rep.unexplained_peaks);
  }

  // intensity and counts
  {
    RunningStats in, bc;
    for (const auto& o : outputs) {
      in.add(o.intensity);
      bc.add(o.box_count);
    }
    const double model_rho = scenario_intensity(s);
    if (!s.cluster) metrics["intensity_rel"] = std::abs(in.mean() - model_rho) / model_rho;
    metrics["intensity_mean"] = in.mean();
    if (const auto* b = std::get_if<BranchingSpec>(&s.process)) {
      const double expect = b->cfg.rho * std::pow(2.0 * b->cfg.box_halfwidth, b->cfg.dim);
      metrics["box_count_mean"] = bc.mean();
      metrics["count_z"] = bc.stderr_() > 0.0 ? std::abs(bc.mean() - expect) / bc.stderr_() : 0.0;
    }
    if (s.tolerances.count("min_distance_violations")) {
      const double R = std::get<MaternProcess>(std::get<CentreProcess>(s.process)).R;
      double v = 0.0;
      for (const auto& o : outputs) v += o.min_distance < R ? 1.0 : 0.0;
      metrics["min_distance_violations"] = v;
    }
  }

  // periodicity of the ac density under k -> k + shift
  if (s.periodicity_shift && s.k_count > 0) {
    const double steps = *s.periodicity_shift / s.k_step[0];
    const auto st = static_cast<std::size_t>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(st)) > 1e-9) throw Error("shift is not a multiple of the k step", "estimator.periodicity_shift");
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t j = 0; j + st < s.k_count; ++j) {
      if (rep.excluded[j] || rep.excluded[j + st]) continue;
      const double a = res.spectrum.intensity_mean[j], b = res.spectrum.intensity_mean[j + st];
      const double v = std::pow(res.spectrum.intensity_stderr[j], 2) + std::pow(res.spectrum.intensity_stderr[j + st], 2);
      acc += (a - b) * (a - b) / v;
      ++pairs;
    }
    if (!pairs) throw Error("no grid pairs for the periodicity check", "estimator.periodicity_shift");
    metrics["periodicity_z2"] = acc / static_cast<double>(pairs);
    metrics["periodicity_pairs"] = static_cast<double>(pairs);
  }

  // direct-space statistics
  if (ac.mode != AutocorrMode::none) {
    const auto dm = direct_space_model(s);
    const double rho = scenario_intensity(s);
    const bool palm = ac.mode == AutocorrMode::palm;
    struct Bin {
      double r0, r1, z, est, im, se;
    };
    std::vector<Bin> bins;
    if (ac.mode == AutocorrMode::naive || palm) {
      AcHistogram h;
      if (palm) {
        std::vector<PalmSample> ps;
        for (auto& o : outputs) ps.push_back(std::move(*o.palm));
        h = palm_merge(ps, s.dim, ac.bin_width, ac.max_extent);
      } else {
        std::vector<AcHistogram> hs;
        for (auto& o : outputs) hs.push_back(std::move(*o.naive));
        h = average_histograms(hs);
      }
      res.autocorr_atom0 = h.atom0;
      for (std::size_t q = 0; q < h.density.size(); ++q) {
        const Vec z = h.center(q);
        bool on_axis = true;
        for (int a = 1; a < s.dim; ++a) on_axis = on_axis && z[a] == 0.0;
        if (!on_axis) continue;
        const double r = std::abs(z[0]);
        bins.push_back({std::max(0.0, r - 0.5 * h.bin_width), r + 0.5 * h.bin_width, z[0], h.density[q].real(),
                        h.density[q].imag(), h.stderr_re[q]});
      }
    } else {
      std::vector<RadialProfile> ps;
      for (auto& o : outputs) ps.push_back(std::move(*o.radial));
      const auto p = average_profiles(ps);
      for (std::size_t b = 0; b < p.density.size(); ++b)
        bins.push_back({b * p.bin_width, (b + 1) * p.bin_width, p.r_mid[b], p.density[b], 0.0, p.stderr_[b]});
    }
    for (const auto& b : bins) res.autocorr.push_back({b.z, b.est, b.im, b.se});

    if (dm) {
      const double scale = palm ? 1.0 / rho : 1.0;
      const double bg = dm->background * scale;
      double sum_rel = 0.0, max_rel = 0.0, sum_ex = 0.0;
      std::size_t n = 0;
      for (const auto& b : bins) {
        if (b.z == 0.0 || b.r0 < ac.r_min - 1e-12 || b.r1 > ac.r_max + 1e-12) continue;
        const double mv = scale * (ac.mode == AutocorrMode::naive || palm
                                       ? detail::shell_average(dm->density, b.r0, b.r1, 1)
                                       : detail::shell_average(dm->density, b.r0, b.r1, s.dim));
        if (!std::isfinite(mv)) continue;
        const double rel = std::abs(b.est - mv) / std::abs(mv);
        sum_rel += rel;
        max_rel = std::max(max_rel, rel);
        if (mv != bg) sum_ex += std::abs((b.est - bg) - (mv - bg)) / std::abs(mv - bg);
        ++n;
      }
      if (n) {
        metrics["autocorr_mean_rel"] = sum_rel / static_cast<double>(n);
        metrics["autocorr_max_rel"] = max_rel;
        metrics["autocorr_excess_mean_rel"] = sum_ex / static_cast<double>(n);
        metrics["autocorr_bins"] = static_cast<double>(n);
      }
      if (ac.mode == AutocorrMode::naive || palm) {
        const double a0 = palm ? 1.0 : dm->atom0;
        metrics["autocorr_atom_rel"] = std::abs(res.autocorr_atom0 - a0) / a0;
      }
    }
  }

  for (const auto& [name, threshold] : s.tolerances) {
    if (std::find(spectral_metric_names().begin(), spectral_metric_names().end(), name) != spectral_metric_names().end())
      continue;
    auto it = metrics.find(name);
    if (it == metrics.end()) throw Error("metric could not be computed for this scenario", "tolerances." + name);
    res.report.add_check(name, it->second, threshold);
  }
  res.exit_code = res.report.pass() ? 0 : 2;

  // report
  json& r = res.report_json;
  r["name"] = s.name;
  r["config"] = s.raw;
  r["seed"] = s.seed;
  r["realisations"] = s.realisations;
  r["git_describe"] = PPDIFF_GIT_DESCRIBE;
  r["model"] = {{"label", model.label}, {"exact", model.exact}};
  r["window"] = {{"volume", s.window.volume()}, {"scale", s.window.scale()}, {"dim", s.dim}};
  r["exclusion"] = {{"radius", pol.radius}, {"leak_tol", pol.leak_tol}, {"compared_points", rep.compared_points}};
  json atoms = json::array();
  for (const auto& a : rep.atoms)
    atoms.push_back({{"k", a.k}, {"estimate", a.estimate}, {"stderr", a.stderr_}, {"model", a.model},
                     {"rel_error", detail::finite_or_null(a.rel_error)}, {"z", detail::finite_or_null(a.z)}});
  r["atoms"] = atoms;
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = detail::finite_or_null(v);
  r["metrics"] = m;
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name}, {"value", detail::finite_or_null(c.value)}, {"threshold", c.threshold}, {"pass", c.pass}});
  r["checks"] = checks;
  json unexplained = json::array();
  for (const auto& k : rep.unexplained_k) unexplained.push_back(k);
  r["unexplained_peaks"] = unexplained;
  r["pass"] = rep.pass();

  if (opt.out) {
    std::filesystem::create_directories(*opt.out);
    std::ofstream(*opt.out / "report.json") << r.dump(2) << "\n";
    std::ofstream sp(*opt.out / "spectrum.csv");
    sp << "k,mean,stderr\n";
    for (std::size_t j = 0; j < res.spectrum.k_grid.size(); ++j) {
      const auto& k = res.spectrum.k_grid[j];
      sp << detail::format_double(s.dim == 1 ? k[0] : norm(k)) << "," << detail::format_double(res.spectrum.intensity_mean[j])
         << "," << detail::format_double(res.spectrum.intensity_stderr[j]) << "\n";
    }
    std::ofstream acf(*opt.out / "autocorr.csv");
    acf << "z,re,im,stderr\n";
    for (const auto& row : res.autocorr)
      acf << detail::format_double(row.z) << "," << detail::format_double(row.re) << "," << detail::format_double(row.im)
          << "," << detail::format_double(row.stderr_) << "\n";
  }
  return res;
}

/// Runs a config that is either a single scenario or {"suite": [...]}; suite
/// members write into subdirectories named after them.
inline std::vector<ScenarioResult> run_config(const json& j, const RunOptions& opt) {
  if (j.is_object() && j.contains("suite")) {
    const auto& list = j.at("suite");
    if (!list.is_array() || list.empty()) throw Error("expected a non-empty array", "suite");
    std::vector<Scenario> parsed;
    for (std::size_t i = 0; i < list.size(); ++i)
      parsed.push_back(cfg::with_prefix("suite[" + std::to_string(i) + "]", [&] { return parse_scenario(list[i]); }));
    std::vector<ScenarioResult> out;
    for (const auto& s : parsed) {
      RunOptions o = opt;
      if (opt.out) o.out = *opt.out / s.name;
      out.push_back(run_scenario(s, o));
    }
    return out;
  }
  return {run_scenario(parse_scenario(j), opt)};
}

}  // namespace ppdiff
