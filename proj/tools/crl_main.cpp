#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "crl/harness.hpp"
#include "crl/proptests.hpp"

namespace {

crl::harness::ExperimentConfig load(const std::string& path, const std::string& seed_override) {
  crl::harness::ExperimentConfig cfg = crl::harness::load_config(path);
  if (!seed_override.empty()) cfg.seed = std::stoull(seed_override);
  return cfg;
}

void print_aggregate(const crl::harness::ExperimentConfig& cfg, const std::vector<crl::harness::RunRecord>& runs) {
  for (const auto& s : crl::harness::aggregate(runs, cfg))
    std::printf("%-16s %.6g +/- %.3g (%d)\n", s.metric.c_str(), s.mean, s.std_error, s.count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-based causal representation learning experiments"};
  app.require_subcommand(1);

  std::string config, out = "out", seed_override, filter;
  int workers = 1;
  int instances = 20;
  std::uint64_t prop_seed = 1;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    if (needs_out) sub->add_option("--out", out, "output directory");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", seed_override, "replace the master seed");
  };
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "run the config's sweep axis");
  add_common(sweep, true);
  auto* extra = app.add_subcommand("extrapolate", "double-intervention extrapolation residuals");
  add_common(extra, true);
  auto* val = app.add_subcommand("validate-config", "check a config and print its resolved form");
  val->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* prop = app.add_subcommand("proptest", "run the property suite");
  prop->add_option("--filter", filter, "substring of case names");
  prop->add_option("--instances", instances, "random instances per case")->check(CLI::PositiveNumber);
  prop->add_option("--seed", prop_seed, "suite seed");
  prop->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load(config, seed_override);
      print_aggregate(cfg, crl::harness::cli_run(cfg, out, workers));
    } else if (*sweep) {
      crl::harness::cli_sweep(load(config, seed_override), out, workers);
      std::printf("wrote %s/sweep.csv\n", out.c_str());
    } else if (*extra) {
      crl::harness::cli_extrapolate(load(config, seed_override), out, workers);
      std::printf("wrote %s/extrapolate.csv\n", out.c_str());
    } else if (*val) {
      std::printf("%s\n", crl::harness::to_json(crl::harness::load_config(config)).c_str());
    } else if (*prop) {
      crl::proptests::SuiteOptions opts;
      opts.filter = filter;
      opts.instances = instances;
      opts.seed = prop_seed;
      opts.workers = workers;
      auto report = crl::proptests::run_property_suite(opts);
      std::fputs(crl::proptests::format_report(report).c_str(), stdout);
      return report.all_passed() ? 0 : 1;
    }
  } catch (const crl::harness::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
