#pragma once

#include <map>
#include <string>

#include <json.hpp>

namespace ppdiff {

namespace detail {

inline nlohmann::json renewal_scenario(const std::string& name, const nlohmann::json& law, const nlohmann::json& tol) {
  return {{"name", name},
          {"realisations", 200},
          {"process", {{"type", "renewal"}, {"law", law}}},
          {"window", {{"kind", "cube"}, {"half_width", 5000}, {"center", {5000}}}},
          {"estimator", {{"k_origin", {0.1}}, {"k_step", {0.05}}, {"k_count", 79}, {"band_half", 4}, {"atoms", {{0.0}}}}},
          {"tolerances", tol}};
}

inline nlohmann::json line_scenario(const std::string& name, const nlohmann::json& process, const nlohmann::json& estimator,
                                    const nlohmann::json& tol) {
  return {{"name", name},
          {"realisations", 200},
          {"process", process},
          {"window", {{"kind", "cube"}, {"half_width", 5000}, {"center", {5000}}}},
          {"estimator", estimator},
          {"tolerances", tol}};
}

}  // namespace detail

/// Named configs shipped with the tool; `scenarios/*.json` holds the same documents.
inline const std::map<std::string, nlohmann::json>& builtin_scenarios() {
  using nlohmann::json;
  static const std::map<std::string, json> all = [] {
    std::map<std::string, json> m;
    const json grid = {{"k_origin", {0.1}}, {"k_step", {0.05}}, {"k_count", 79}, {"band_half", 4}};

    json sweep = json::array();
    for (const auto& [tag, alpha] : std::vector<std::pair<std::string, double>>{{"0_7", 0.7}, {"1", 1.0}, {"2", 2.0}, {"8", 8.0}}) {
      auto s = detail::renewal_scenario("gamma_alpha" + tag, {{"type", "gamma"}, {"alpha", alpha}},
                                        {{"density_mean_rel", 0.05}, {"atom_rel", 0.05}});
      m[s["name"]] = s;
      sweep.push_back(s);
    }
    m["gamma_sweep"] = {{"name", "gamma_sweep"}, {"suite", sweep}};

    for (const auto& [tag, rho] : std::vector<std::pair<std::string, double>>{{"", 1.0}, {"_rho2", 2.0}}) {
      json est = grid;
      est["atoms"] = {{0.0}};
      m["poisson_d1" + tag] = detail::line_scenario("poisson_d1" + tag, {{"type", "poisson"}, {"rho", rho}, {"dim", 1}}, est,
                                                    {{"atom_rel", 0.05}, {"density_level_rel", 0.03}});
    }
    m["poisson_d2"] = {{"name", "poisson_d2"},
                       {"realisations", 200},
                       {"process", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 2}}},
                       {"window", {{"kind", "cube"}, {"half_width", 50}}},
                       {"estimator",
                        {{"k_origin", {0.1, 0.0}}, {"k_step", {0.05, 0.0}}, {"k_count", 79}, {"band_half", 4}, {"atoms", {{0.0, 0.0}}}}},
                       {"tolerances", {{"atom_rel", 0.05}, {"density_level_rel", 0.05}}}};

    m["slivnyak"] = detail::line_scenario(
        "slivnyak", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 1}},
        {{"k_count", 0}, {"autocorr", {{"mode", "palm"}, {"bin_width", 0.1}, {"max_extent", 5.0}}}},
        {{"autocorr_max_rel", 0.03}, {"autocorr_atom_rel", 0.03}});
    m["slivnyak"]["realisations"] = 100;

    m["poisson_autocorr"] = detail::line_scenario(
        "poisson_autocorr", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 1}},
        {{"k_count", 0}, {"autocorr", {{"mode", "naive"}, {"bin_width", 0.1}, {"max_extent", 5.0}}}},
        {{"autocorr_mean_rel", 0.03}, {"autocorr_atom_rel", 0.03}});
    m["poisson_autocorr"]["realisations"] = 100;

    {
      json est = grid;
      est["atoms"] = {{-2.0}, {-1.0}, {0.0}, {1.0}, {2.0}};
      auto s = detail::line_scenario("lambda_gas", {{"type", "lattice"}, {"b", 1.0}, {"dim", 1}}, est,
                                     {{"atom_rel", 0.05}, {"density_level_rel", 0.03}});
      s["cluster"] = {{"type", "bernoulli"}, {"p", 0.5}};
      m["lambda_gas"] = s;
    }
    {
      json est = grid;
      est["scan"] = true;
      est["atoms"] = {{0.0}, {1.5}, {3.0}};
      est["periodicity_shift"] = 1.5;
      m["tiling_rational"] = detail::line_scenario(
          "tiling_rational", {{"type", "renewal"}, {"law", {{"type", "two_atom"}, {"a", "2/3"}, {"b", "4/3"}, {"p", "1/2"}}}},
          est, {{"atom_rel", 0.05}, {"unexplained_peaks", 0}, {"periodicity_z2", 2.0}});
    }
    {
      json est = grid;
      est["scan"] = true;
      est["atoms"] = {{0.0}};
      m["tiling_irrational"] = detail::line_scenario(
          "tiling_irrational",
          {{"type", "renewal"}, {"law", {{"type", "two_atom"}, {"p", 0.5}, {"b_over_a", 1.6180339887498949}}}}, est,
          {{"atom_rel", 0.05}, {"unexplained_peaks", 0}});
    }
    {
      const json est = {{"k_origin", {0.2}}, {"k_step", {0.05}}, {"k_count", 57}, {"band_half", 4}, {"atoms", {{0.0}}}};
      auto ns = detail::line_scenario("neyman_scott", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 1}}, est,
                                      {{"density_mean_rel", 0.05}, {"atom_rel", 0.05}});
      ns["cluster"] = {{"type", "neyman_scott"},
                       {"k_probs", {0.25, 0.25, 0.25, 0.25}},
                       {"law", {{"type", "gaussian"}, {"sigma", 0.2}}}};
      m["neyman_scott"] = ns;
      auto disp = detail::line_scenario("displacement", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 1}}, est,
                                        {{"density_mean_rel", 0.05}, {"atom_rel", 0.05}});
      disp["cluster"] = {{"type", "displacement"}, {"law", {{"type", "gaussian"}, {"sigma", 0.3}}}};
      m["displacement"] = disp;
    }
    {
      json est = grid;
      est["atoms"] = {{0.0}};
      auto s = detail::line_scenario("signed_poisson", {{"type", "poisson"}, {"rho", 1.0}, {"dim", 1}}, est,
                                     {{"atom_null_z", 3.0}, {"density_level_rel", 0.03}});
      s["cluster"] = {{"type", "signed"}, {"p", 0.5}};
      m["signed_poisson"] = s;
    }
    m["matern"] = {{"name", "matern"},
                   {"realisations", 100},
                   {"process", {{"type", "matern"}, {"rho", 2.0}, {"R", 0.4}, {"dim", 2}}},
                   {"window", {{"kind", "cube"}, {"half_width", 50}}},
                   {"estimator",
                    {{"k_count", 0},
                     {"autocorr", {{"mode", "radial"}, {"bin_width", 0.1}, {"max_extent", 2.0}, {"r_min", 0.8}, {"r_max", 1.6}}}}},
                   {"tolerances", {{"min_distance_violations", 0}, {"intensity_rel", 0.03}, {"autocorr_max_rel", 0.05}}}};

    // W = [−1, τ − 1): centre (τ − 2)/2, half-width τ/2; tent profile peaked at the centre
    const json fib_common = {{"window_center", -0.19098300562505258},
                             {"window_halfwidth", 0.80901699437494745},
                             {"profile", {{"type", "tent"}, {"center", -0.19098300562505258}, {"half_width", 0.80901699437494745}}}};
    {
      json p = fib_common;
      p["type"] = "fibonacci_comb";
      m["fibonacci_comb"] = {{"name", "fibonacci_comb"},
                             {"realisations", 1},
                             {"process", p},
                             {"window", {{"kind", "cube"}, {"half_width", 50000}, {"center", {50000}}}},
                             {"estimator", {{"k_count", 0}, {"atoms", {{"strongest", 5}, {"k_max", 4.0}}}}},
                             {"tolerances", {{"atom_rel", 0.02}}}};
    }
    {
      json p = fib_common;
      p["type"] = "fibonacci_gas";
      json est = grid;
      est["leak_tol"] = 1e-3;
      m["fibonacci_gas"] = {{"name", "fibonacci_gas"},
                            {"realisations", 100},
                            {"process", p},
                            {"window", {{"kind", "cube"}, {"half_width", 5000}, {"center", {5000}}}},
                            {"estimator", est},
                            {"tolerances", {{"density_level_rel", 0.05}}}};
    }
    m["cbbm"] = {{"name", "cbbm"},
                 {"realisations", 500},
                 {"process",
                  {{"type", "cbbm"}, {"rho", 1.0}, {"V", 2.0}, {"dim", 3}, {"T", 4.0}, {"box_halfwidth", 16.0}, {"inner_halfwidth", 4.0}}},
                 {"estimator",
                  {{"k_count", 0},
                   {"autocorr", {{"mode", "torus"}, {"bin_width", 0.1}, {"max_extent", 2.0}, {"r_min", 0.2}, {"r_max", 2.0}}}}},
                 {"tolerances", {{"autocorr_excess_mean_rel", 0.15}, {"count_z", 3.0}}}};
    return m;
  }();
  return all;
}

}  // namespace ppdiff
