#pragma once
// Trajectory ensembles: reproducible parallel execution over per-trajectory
// random streams, averaged observables with standard errors, threshold and
// effective times, and the bounding-parameter sweep.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qwfb/optimize.hpp"

namespace qwfb {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationConfig {
  int n = 5;
  double gamma = 1.0;  // unit convention: all rates in units of gamma = 1
  double kappa = 1.0;
  double eta = 1.0;    // pure-state trajectories require unit efficiency
  double dt = 0.01;
  int steps = 0;       // 0 selects the strategy-dependent default horizon
  int n_traj = 5000;
  FeedbackStrategy strategy = UnboundedFeedback{};
  ControlKind control_kind = ControlKind::Hopping;
  int target = 0;
  double f_th = 0.95;
  std::uint64_t master_seed = 1;
  int record_stride = 1;
  bool record_dy = false;
  OptimizerSettings opt{};

  // `steps`, or the default horizon: gamma*T = 3 (none/unbounded),
  // 12 (bounded/digital), 10 (analytic single coupling).
  int effective_steps() const;

  void validate() const;  // throws ConfigError
};

struct TrajectoryRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  int abort_step = -1;

  RealVector times;
  RealVector fidelity;
  RealVector mean_x, mean_y;
  RealMatrix theta;             // recorded step x control (zeros at t = 0)
  RealMatrix dy;                // recorded step x channel; empty unless record_dy
  RealVector analytic_v;        // analytic strategy only, else empty
  RealVector analytic_applied;  // 0/1 flags, analytic strategy only
};

struct EnsembleStats {
  RealVector times;
  RealVector mean_fidelity, se_fidelity;
  RealMatrix mean_theta, se_theta;  // (steps+1) x controls
  RealVector mean_x, mean_y;
  RealVector mean_v;            // analytic: mean certificate over applied steps
  RealVector applied_fraction;  // analytic: fraction of trajectories applying feedback
  std::optional<double> t_th;
  std::optional<double> eff_time;
  RealVector asymptotic_theta;  // per-control mean over the final 20% of the grid
  int n_completed = 0;
  int n_aborted = 0;
};

// Deterministic function of (cfg, master_seed, index); the same arguments
// reproduce the record bit for bit.
TrajectoryRecord run_trajectory(const SimulationConfig& cfg, int index);

// Averages over cfg.n_traj independent trajectories. Aborted trajectories
// are excluded and counted; more than 1% of aborts fails the run. The
// reduction order is fixed by trajectory index, so the result is identical
// for any worker count.
EnsembleStats run_ensemble(const SimulationConfig& cfg);

// First grid time with mean fidelity >= f_th.
std::optional<double> threshold_time(const RealVector& times, const RealVector& mean_fidelity,
                                     double f_th);

// gamma * t_th / f_th; absent t_th propagates.
std::optional<double> effective_time(const std::optional<double>& t_th, double f_th,
                                     double gamma);

struct XiSweepRow {
  double xi = 0.0;
  std::optional<double> t_th, eff_time;
  RealVector asymptotic_theta;
};

// One bounded ensemble per xi, all sharing cfg.master_seed so the xi values
// see common randomness.
std::vector<XiSweepRow> sweep_xi(const SimulationConfig& cfg,
                                 const std::vector<double>& xi_values);

// Worker threads used by run_ensemble: the QWFB_WORKERS environment variable
// when set, otherwise the hardware concurrency.
int worker_count();

}  // namespace qwfb
