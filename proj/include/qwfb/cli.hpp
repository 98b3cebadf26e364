#pragma once
// Config-file parsing, command implementations and bit-stable CSV/JSON
// output. One experiment per flat key=value config file; every numeric value
// is serialized with 17 significant digits so re-parsing reproduces it
// exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "qwfb/ensemble.hpp"
#include "qwfb/lindblad.hpp"

namespace qwfb {

// Config failures keep their class so the CLI can exit with distinct codes:
// missing file (2), schema violation (4), invariant violation (5).
struct ConfigFileError : ConfigError {
  using ConfigError::ConfigError;
};
struct ConfigSchemaError : ConfigError {
  using ConfigError::ConfigError;
};
struct ConfigInvariantError : ConfigError {
  using ConfigError::ConfigError;
};

// Parses and fully validates a flat key=value config file. Unknown keys are
// rejected; absent keys take the SimulationConfig defaults.
SimulationConfig parse_config(const std::filesystem::path& path);

struct OutputBundle {
  std::filesystem::path ensemble_csv;
  std::filesystem::path couplings_csv;
  std::filesystem::path trajectory_csv;
  std::filesystem::path populations_csv;
  std::filesystem::path sweep_csv;
  std::filesystem::path summary_json;
};

// Runs the ensemble and writes ensemble.csv, couplings.csv and summary.json.
OutputBundle cmd_simulate(const SimulationConfig& cfg, const std::filesystem::path& out_dir);

// Writes one conditional trajectory to trajectory.csv.
OutputBundle cmd_trajectory(const SimulationConfig& cfg, int index,
                            const std::filesystem::path& out_dir);

enum class UnconditionalChannels { XY, Index };

// Integrates the master equation and writes populations.csv. When cfg.steps
// is unset the horizon defaults to gamma*T = 5.
OutputBundle cmd_unconditional(const SimulationConfig& cfg, UnconditionalChannels channels,
                               const std::filesystem::path& out_dir);

// One bounded ensemble per xi; writes sweep.csv.
OutputBundle cmd_sweep_xi(const SimulationConfig& cfg, const std::vector<double>& xi_values,
                          const std::filesystem::path& out_dir);

// 17-significant-digit decimal form; round-trips any double exactly.
std::string format_g17(double v);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qwfb
