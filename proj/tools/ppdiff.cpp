// Scenario runner: simulate, estimate, compare against the analytic model.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ppdiff/ppdiff.hpp"

namespace {

using ppdiff::json;

json load_config(const std::string& ref) {
  if (std::filesystem::exists(ref)) {
    std::ifstream in(ref);
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw ppdiff::Error(std::string("invalid JSON: ") + e.what(), ref);
    }
  }
  const auto& builtins = ppdiff::builtin_scenarios();
  if (auto it = builtins.find(ref); it != builtins.end()) return it->second;
  throw ppdiff::Error("no such file or built-in scenario", ref);
}

int run(const std::string& ref, std::optional<std::uint64_t> seed, std::optional<std::size_t> realisations,
        unsigned threads, const std::string& out) {
  ppdiff::RunOptions opt;
  opt.seed = seed;
  opt.realisations = realisations;
  opt.threads = threads;
  opt.out = out;
  std::vector<ppdiff::ScenarioResult> results;
  try {
    results = ppdiff::run_config(load_config(ref), opt);
  } catch (const ppdiff::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  int code = 0;
  for (const auto& r : results) {
    for (const auto& c : r.report.checks)
      std::printf("%-24s %-26s %12.6g <= %-10g %s\n", r.name.c_str(), c.name.c_str(), c.value, c.threshold,
                  c.pass ? "ok" : "FAIL");
    if (r.report.checks.empty()) std::printf("%-24s (no tolerance checks)\n", r.name.c_str());
    code = std::max(code, r.exit_code);
  }
  return code;
}

int selftest(const std::string& suite) {
  std::vector<ppdiff::SelftestCase> cases;
  if (suite == "psf") cases = ppdiff::selftest_psf();
  else if (suite == "riesz") cases = ppdiff::selftest_riesz();
  else if (suite == "identities") cases = ppdiff::selftest_identities();
  else {
    std::cerr << "unknown suite '" << suite << "' (psf, riesz, identities)\n";
    return 1;
  }
  bool ok = true;
  for (const auto& c : cases) {
    std::printf("%-48s err=%.3g tol=%.1g %s\n", c.name.c_str(), c.error, c.tolerance, c.pass() ? "ok" : "FAIL");
    ok = ok && c.pass();
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ppdiff: diffraction of point processes by simulation and analytic models"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a scenario config (file path or built-in name)");
  std::string config, out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realisations;
  unsigned threads = 1;
  run_cmd->add_option("config", config, "Config path or built-in scenario name")->required();
  run_cmd->add_option("--seed", seed, "Master seed (overrides the config)");
  run_cmd->add_option("--realisations", realisations, "Realisation count (overrides the config)");
  run_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out, "Output directory");

  auto* st_cmd = app.add_subcommand("selftest", "Run a deterministic identity suite");
  std::string suite;
  st_cmd->add_option("suite", suite, "psf | riesz | identities")->required();

  auto* ls_cmd = app.add_subcommand("list-scenarios", "List built-in scenarios");
  std::string write_dir;
  ls_cmd->add_option("--write", write_dir, "Also write each config as <dir>/<name>.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config, seed, realisations, threads, out);
    if (*st_cmd) return selftest(suite);
    for (const auto& [name, cfg] : ppdiff::builtin_scenarios()) {
      std::printf("%s\n", name.c_str());
      if (!write_dir.empty()) {
        std::filesystem::create_directories(write_dir);
        std::ofstream(std::filesystem::path(write_dir) / (name + ".json")) << cfg.dump(2) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
