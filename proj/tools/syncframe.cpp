#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "syncframe/cli.hpp"

#ifndef SYNCFRAME_GOLDEN_PATH
#define SYNCFRAME_GOLDEN_PATH "data/golden_profiles.json"
#endif

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator and analyzer for multi-writer synchronization mechanisms"};
  app.require_subcommand(1);

  std::string config_path;
  auto* simulate = app.add_subcommand("simulate", "Run a configured simulation and its checkers");
  simulate->add_option("config", config_path, "Run configuration (JSON)")->required();

  std::string mechanism;
  int n = 0;
  std::string golden = SYNCFRAME_GOLDEN_PATH;
  auto* profile = app.add_subcommand("profile", "Derive a mechanism's property row and compare it to the reference");
  profile->add_option("mechanism", mechanism, "Mechanism name")->required();
  profile->add_option("--n", n, "Number of writers")->required();
  profile->add_option("--golden", golden, "Reference table (JSON)");

  int n_max = 0;
  auto* limits = app.add_subcommand("verify-limits", "Cross-check the fault-tolerance limit formulas");
  limits->add_option("--n-max", n_max, "Largest n to enumerate")->required();

  std::string trace_path;
  auto* replay = app.add_subcommand("replay", "Re-run a recorded trace and compare it record by record");
  replay->add_option("trace", trace_path, "Trace file written by simulate")->required();

  int f = 0, seeds = 0;
  unsigned jobs = 1;
  auto* campaign = app.add_subcommand("campaign", "Run seeded crash campaigns");
  campaign->add_option("mechanism", mechanism, "Mechanism name")->required();
  campaign->add_option("--n", n, "Number of writers")->required();
  campaign->add_option("--f", f, "Writers to crash per run")->required();
  campaign->add_option("--seeds", seeds, "Number of seeds (1..k)")->required();
  campaign->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : syncframe::kExitConfigError;
  }

  if (*simulate) return syncframe::cmd_simulate(config_path, std::cout, std::cerr);
  if (*profile) return syncframe::cmd_profile(mechanism, n, golden, std::cout, std::cerr);
  if (*limits) return syncframe::cmd_verify_limits(n_max, std::cout, std::cerr);
  if (*replay) return syncframe::cmd_replay(trace_path, std::cout, std::cerr);
  return syncframe::cmd_campaign(mechanism, n, f, seeds, jobs, std::cout, std::cerr);
}
