#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "pdsm/errors.hpp"
#include "pdsm/experiment.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out, std::size_t workers) {
  pdsm::ScenarioConfig config = pdsm::load_scenario(config_path);
  if (workers) config.workers = workers;
  const fs::path dir = out.empty() ? fs::path("runs") / config.name : fs::path(out);
  const pdsm::ScenarioResult result = pdsm::run_scenario(config, dir);
  std::size_t lemma1 = 0, lemma3 = 0, unstable = 0, violations = 0;
  for (const auto& r : result.runs) {
    lemma1 += !r.lemma1_ok;
    lemma3 += !r.lemma3_ok;
    unstable += !r.stable;
    violations += r.rule_violations;
  }
  std::printf("wrote %s: %zu runs\n", dir.string().c_str(), result.runs.size());
  std::printf("  Lemma-1 ledger failures:   %zu\n", lemma1);
  if (config.pipeline == pdsm::Pipeline::queue) {
    std::printf("  continuity bound failures: %zu\n", lemma3);
    std::printf("  unstable runs:             %zu\n", unstable);
    std::printf("  rule violations:           %zu\n", violations);
  }
  std::printf("  certificates: %zu pass, %zu fail\n", result.certificate_passes,
              result.certificate_failures);
  return lemma1 == 0 ? 0 : 1;
}

int cmd_oracle(const std::string& config_path) {
  const pdsm::ScenarioConfig config = pdsm::load_scenario(config_path);
  std::cout << pdsm::oracle_to_json(pdsm::compute_oracle(config)).dump(2) << '\n';
  return 0;
}

int cmd_summarize(const std::string& dir) {
  const pdsm::SummaryTable table = pdsm::emit_summary(dir);
  for (const auto& w : table.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%-10s %10s %5s %14s %14s %12s %10s %6s\n", "alpha", "k", "runs", "|gap| mean",
              "|gap| std", "Q slope", "cont.ratio", "cert");
  for (const auto& r : table.rows)
    std::printf("%-10g %10zu %5zu %14.6g %14.6g %12.4g %10.4g %3zu/%zu\n", r.alpha, r.k, r.runs,
                r.abs_gap_mean, r.abs_gap_std, r.stability_slope_mean, r.lemma3_max_ratio,
                r.certificate_passes, r.certificate_passes + r.certificate_failures);
  return 0;
}

int cmd_check(const std::string& dir) {
  const pdsm::CheckReport rep = pdsm::check_artifacts(dir);
  for (const auto& f : rep.failures) std::printf("FAIL %s\n", f.c_str());
  std::printf("%zu checks, %zu failures\n", rep.checks, rep.failures.size());
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed dual subgradient experiments"};
  app.set_version_flag("--version", pdsm::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, dir;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run every (alpha, seed) pair of a scenario");
  run->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "Artifact directory (default runs/<name>)");
  run->add_option("-j,--workers", workers, "Worker threads (default: config or all cores)");

  auto* oracle = app.add_subcommand("oracle", "Solve the fluid problem and print x*, f*, lambda*");
  oracle->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

  auto* summarize = app.add_subcommand("summarize", "Aggregate an artifact directory");
  summarize->add_option("dir", dir, "Artifact directory")->required();

  auto* check = app.add_subcommand("check", "Re-validate stored artifacts");
  check->add_option("dir", dir, "Artifact directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, out_dir, workers);
    if (*oracle) return cmd_oracle(config_path);
    if (*summarize) return cmd_summarize(dir);
    if (*check) return cmd_check(dir);
  } catch (const pdsm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
