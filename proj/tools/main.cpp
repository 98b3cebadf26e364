// Command-line front end: simulate | trajectory | unconditional | sweep-xi.
// Exit codes: 0 success, 2 missing config file, 4 config schema violation,
// 5 config invariant violation, 3 runtime failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qwfb/cli.hpp"

namespace {

void report(const qwfb::OutputBundle& bundle) {
  for (const auto* path : {&bundle.ensemble_csv, &bundle.couplings_csv, &bundle.trajectory_csv,
                           &bundle.populations_csv, &bundle.sweep_csv, &bundle.summary_json}) {
    if (!path->empty()) std::printf("wrote %s\n", path->c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qwfb: measurement-feedback search on a cycle by a monitored quantum walk"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string channels = "xy";
  int index = 0;
  std::vector<double> xi_values;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value experiment file")->required();
    cmd->add_option("--out", out_dir, "output directory (default: current)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run a trajectory ensemble");
  add_common(sim);
  CLI::App* traj = app.add_subcommand("trajectory", "run and record a single trajectory");
  add_common(traj);
  traj->add_option("--index", index, "trajectory index (default 0)");
  CLI::App* uncond = app.add_subcommand("unconditional", "integrate the unconditional dynamics");
  add_common(uncond);
  uncond->add_option("--channels", channels, "xy | index (default xy)")
      ->check(CLI::IsMember({"xy", "index"}));
  CLI::App* sweep = app.add_subcommand("sweep-xi", "bounded ensembles over a list of xi");
  add_common(sweep);
  sweep->add_option("--xi", xi_values, "comma-separated bounding parameters")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const qwfb::SimulationConfig cfg = qwfb::parse_config(config_path);
    if (sim->parsed()) {
      report(qwfb::cmd_simulate(cfg, out_dir));
    } else if (traj->parsed()) {
      report(qwfb::cmd_trajectory(cfg, index, out_dir));
    } else if (uncond->parsed()) {
      const auto ch = channels == "xy" ? qwfb::UnconditionalChannels::XY
                                       : qwfb::UnconditionalChannels::Index;
      report(qwfb::cmd_unconditional(cfg, ch, out_dir));
    } else if (sweep->parsed()) {
      report(qwfb::cmd_sweep_xi(cfg, xi_values, out_dir));
    }
  } catch (const qwfb::ConfigFileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const qwfb::ConfigSchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const qwfb::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
