#include "qwfb/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "qwfb/lindblad.hpp"

namespace qwfb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int kChunkSize = 32;  // trajectories per deterministic reduction block

struct EnsembleContext {
  CycleGraph g;
  ComplexMatrix h_s;
  MonitoringSetup mon;
  ControlSet controls;
  std::optional<KrausAssembler> kraus;
  std::optional<DigitalUnitaryTable> table;
  ComplexMatrix collective_control;  // sum of hopping controls, analytic strategy
  ComplexVector psi0;
  RealVector xdiag, ydiag;
  bool analytic = false;
};

EnsembleContext build_context(const SimulationConfig& cfg) {
  cfg.validate();
  EnsembleContext ctx;
  ctx.g = CycleGraph{cfg.n};
  // Adjacency gauge of the walk generator. On a regular graph it drives the
  // same monitored dynamics as the Laplacian (the degree term is a global
  // phase up to conjugation), and its +gamma couplings are sign-aligned with
  // the hopping controls: a walker parked on the target corresponds to
  // theta_0 -> -gamma in the records.
  ctx.h_s = (cfg.gamma * cycle_adjacency(ctx.g)).cast<Complex>();
  ctx.mon = xy_monitoring(ctx.g, cfg.kappa, cfg.eta);
  ctx.controls = (cfg.control_kind == ControlKind::Hopping) ? hopping_controls(ctx.g)
                                                            : onsite_controls(ctx.g);
  ctx.kraus.emplace(ctx.h_s, ctx.mon, cfg.dt);
  if (const auto* digital = std::get_if<DigitalFeedback>(&cfg.strategy))
    ctx.table = precompute_digital_unitaries(ctx.controls, digital->values, cfg.dt, cfg.target);
  if (std::holds_alternative<AnalyticSingleFeedback>(cfg.strategy)) {
    ctx.analytic = true;
    ctx.collective_control = ComplexMatrix::Zero(cfg.n, cfg.n);
    for (const auto& op : ctx.controls.operators) ctx.collective_control += op;
  }
  ctx.psi0 = uniform_superposition(cfg.n);
  ctx.xdiag = ctx.mon.channels[0].op.diagonal().real();
  ctx.ydiag = ctx.mon.channels[1].op.diagonal().real();
  return ctx;
}

StepOptions make_step_options(const SimulationConfig& cfg, const EnsembleContext& ctx) {
  StepOptions opts;
  opts.opt = cfg.opt;
  opts.target = cfg.target;
  opts.kraus = &*ctx.kraus;
  if (ctx.table) opts.digital_table = &*ctx.table;
  if (ctx.analytic) opts.collective_control = &ctx.collective_control;
  return opts;
}

struct StepSample {
  int step = 0;
  double fidelity = 0.0, ex = 0.0, ey = 0.0;
  const FeedbackCouplings* theta = nullptr;  // null at step 0
  const MeasurementStep* meas = nullptr;     // null at step 0
  bool applied = false;
  double v = 0.0;
};

// Runs one conditional trajectory, invoking the sample callback at t = 0 and
// after every step. Returns false (with *abort_step set) on a degenerate
// measurement.
template <typename OnSample>
bool run_one_trajectory(const SimulationConfig& cfg, const EnsembleContext& ctx, int index,
                        OnSample&& on_sample, int* abort_step) {
  RandomStream rng(stream_seed(cfg.master_seed, std::uint64_t(index)));
  const StepOptions opts = make_step_options(cfg, ctx);
  const int steps = cfg.effective_steps();

  ComplexVector psi = ctx.psi0;
  FeedbackCouplings warm = FeedbackCouplings::Zero(ctx.controls.size());

  const auto observe = [&](int step, const FeedbackStepResult* r) {
    StepSample s;
    s.step = step;
    s.fidelity = fidelity_to_target(psi, cfg.target);
    s.ex = 0.0;
    s.ey = 0.0;
    for (Eigen::Index k = 0; k < psi.size(); ++k) {
      const double p = std::norm(psi(k));
      s.ex += ctx.xdiag(k) * p;
      s.ey += ctx.ydiag(k) * p;
    }
    if (r != nullptr) {
      s.theta = &r->theta;
      s.meas = &r->meas;
      s.applied = r->analytic_applied;
      s.v = r->analytic_v;
    }
    on_sample(s);
  };

  observe(0, nullptr);
  for (int step = 1; step <= steps; ++step) {
    try {
      FeedbackStepResult r = feedback_step(psi, ctx.h_s, ctx.mon, ctx.controls, cfg.strategy,
                                           cfg.dt, rng, opts, &warm);
      psi = std::move(r.state);
      warm = r.theta;
      observe(step, &r);
    } catch (const DegenerateMeasurementError&) {
      if (abort_step != nullptr) *abort_step = step;
      return false;
    }
  }
  return true;
}

// One trajectory's full-resolution series, merged into the chunk accumulator
// only once the trajectory completes.
struct TrajectoryBuffer {
  Eigen::ArrayXd f, x, y;
  Eigen::ArrayXXd theta;
  Eigen::ArrayXd v, applied;

  void init(int rows, int controls, bool analytic) {
    f.resize(rows);
    x.resize(rows);
    y.resize(rows);
    theta.resize(rows, controls);
    if (analytic) {
      v.resize(rows);
      applied.resize(rows);
    }
  }
};

struct Accumulator {
  Eigen::ArrayXd sum_f, sum_f2, sum_x, sum_y;
  Eigen::ArrayXXd sum_theta, sum_theta2;
  Eigen::ArrayXd sum_v, applied_count;
  long completed = 0;
  long aborted = 0;
  int first_abort_index = -1, first_abort_step = -1;

  void init(int rows, int controls, bool analytic) {
    sum_f = Eigen::ArrayXd::Zero(rows);
    sum_f2 = Eigen::ArrayXd::Zero(rows);
    sum_x = Eigen::ArrayXd::Zero(rows);
    sum_y = Eigen::ArrayXd::Zero(rows);
    sum_theta = Eigen::ArrayXXd::Zero(rows, controls);
    sum_theta2 = Eigen::ArrayXXd::Zero(rows, controls);
    if (analytic) {
      sum_v = Eigen::ArrayXd::Zero(rows);
      applied_count = Eigen::ArrayXd::Zero(rows);
    }
  }

  void add(const TrajectoryBuffer& b, bool analytic) {
    sum_f += b.f;
    sum_f2 += b.f * b.f;
    sum_x += b.x;
    sum_y += b.y;
    sum_theta += b.theta;
    sum_theta2 += b.theta * b.theta;
    if (analytic) {
      sum_v += b.v * b.applied;  // contribute only where feedback was applied
      applied_count += b.applied;
    }
    ++completed;
  }

  void merge(const Accumulator& o, bool analytic) {
    sum_f += o.sum_f;
    sum_f2 += o.sum_f2;
    sum_x += o.sum_x;
    sum_y += o.sum_y;
    sum_theta += o.sum_theta;
    sum_theta2 += o.sum_theta2;
    if (analytic) {
      sum_v += o.sum_v;
      applied_count += o.applied_count;
    }
    completed += o.completed;
    aborted += o.aborted;
    if (first_abort_index < 0 && o.first_abort_index >= 0) {
      first_abort_index = o.first_abort_index;
      first_abort_step = o.first_abort_step;
    }
  }
};

int final_window_start(int rows) { return (4 * rows) / 5; }

}  // namespace

int SimulationConfig::effective_steps() const {
  if (steps > 0) return steps;
  const double horizon = std::visit(
      overloaded{
          [](const NoFeedback&) { return 3.0; },
          [](const UnboundedFeedback&) { return 3.0; },
          [](const BoundedFeedback&) { return 12.0; },
          [](const DigitalFeedback&) { return 12.0; },
          [](const AnalyticSingleFeedback&) { return 10.0; },
      },
      strategy);
  return int(std::lround(horizon / dt));
}

void SimulationConfig::validate() const {
  if (n < 3) throw ConfigError("config: n must be at least 3");
  if (gamma != 1.0)
    throw ConfigError("config: gamma is the unit of every rate and must be 1");
  if (!(kappa >= 0.0)) throw ConfigError("config: kappa must be >= 0");
  if (eta != 1.0)
    throw ConfigError("config: trajectory runs use pure states and require eta = 1");
  if (!(dt > 0.0)) throw ConfigError("config: dt must be positive");
  if (steps < 0) throw ConfigError("config: steps must be >= 1");
  if (effective_steps() < 1) throw ConfigError("config: steps must be >= 1");
  if (n_traj < 1) throw ConfigError("config: n_traj must be >= 1");
  if (!(f_th > 0.0 && f_th <= 1.0)) throw ConfigError("config: f_th must lie in (0, 1]");
  if (target < 0 || target >= n) throw ConfigError("config: target out of range");
  if (record_stride < 1) throw ConfigError("config: record_stride must be >= 1");
  if (!(opt.fd_step > 0.0 && opt.tol > 0.0 && opt.max_iter > 0))
    throw ConfigError("config: optimizer settings must be positive");
  try {
    validate_strategy(strategy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (std::holds_alternative<AnalyticSingleFeedback>(strategy) &&
      control_kind != ControlKind::Hopping)
    throw ConfigError("config: the analytic single coupling acts on hopping controls");
}

TrajectoryRecord run_trajectory(const SimulationConfig& cfg, int index) {
  const EnsembleContext ctx = build_context(cfg);
  const int steps = cfg.effective_steps();
  const int stride = cfg.record_stride;
  const int rows = steps / stride + 1;
  const int n_controls = ctx.controls.size();
  const int n_channels = int(ctx.mon.channels.size());

  TrajectoryRecord rec;
  rec.index = index;
  rec.seed = stream_seed(cfg.master_seed, std::uint64_t(index));
  rec.times.resize(rows);
  rec.fidelity.resize(rows);
  rec.mean_x.resize(rows);
  rec.mean_y.resize(rows);
  rec.theta = RealMatrix::Zero(rows, n_controls);
  if (cfg.record_dy) rec.dy = RealMatrix::Zero(rows, n_channels);
  if (ctx.analytic) {
    rec.analytic_v = RealVector::Zero(rows);
    rec.analytic_applied = RealVector::Zero(rows);
  }

  int abort_step = -1;
  const bool ok = run_one_trajectory(
      cfg, ctx, index,
      [&](const StepSample& s) {
        if (s.step % stride != 0) return;
        const int row = s.step / stride;
        rec.times(row) = s.step * cfg.dt;
        rec.fidelity(row) = s.fidelity;
        rec.mean_x(row) = s.ex;
        rec.mean_y(row) = s.ey;
        if (s.theta != nullptr) rec.theta.row(row) = *s.theta;
        if (cfg.record_dy && s.meas != nullptr) rec.dy.row(row) = s.meas->dy;
        if (ctx.analytic) {
          rec.analytic_v(row) = s.v;
          rec.analytic_applied(row) = s.applied ? 1.0 : 0.0;
        }
      },
      &abort_step);
  if (!ok) {
    rec.aborted = true;
    rec.abort_step = abort_step;
  }
  return rec;
}

EnsembleStats run_ensemble(const SimulationConfig& cfg) {
  const EnsembleContext ctx = build_context(cfg);
  const int steps = cfg.effective_steps();
  const int rows = steps + 1;  // averages use every step regardless of stride
  const int n_controls = ctx.controls.size();

  const int n_chunks = (cfg.n_traj + kChunkSize - 1) / kChunkSize;
  std::vector<Accumulator> chunks;
  chunks.resize(size_t(n_chunks));
  std::atomic<int> next_chunk{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto work = [&]() {
    TrajectoryBuffer buffer;
    buffer.init(rows, n_controls, ctx.analytic);
    try {
      for (;;) {
        const int c = next_chunk.fetch_add(1);
        if (c >= n_chunks) return;
        Accumulator& acc = chunks[size_t(c)];
        acc.init(rows, n_controls, ctx.analytic);
        const int begin = c * kChunkSize;
        const int end = std::min(cfg.n_traj, begin + kChunkSize);
        for (int index = begin; index < end; ++index) {
          int abort_step = -1;
          const bool ok = run_one_trajectory(
              cfg, ctx, index,
              [&](const StepSample& s) {
                buffer.f(s.step) = s.fidelity;
                buffer.x(s.step) = s.ex;
                buffer.y(s.step) = s.ey;
                if (s.theta != nullptr)
                  buffer.theta.row(s.step) = s.theta->transpose().array();
                else
                  buffer.theta.row(s.step).setZero();
                if (ctx.analytic) {
                  buffer.v(s.step) = s.v;
                  buffer.applied(s.step) = s.applied ? 1.0 : 0.0;
                }
              },
              &abort_step);
          if (ok) {
            acc.add(buffer, ctx.analytic);
          } else {
            ++acc.aborted;
            if (acc.first_abort_index < 0) {
              acc.first_abort_index = index;
              acc.first_abort_step = abort_step;
            }
          }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_chunk.store(n_chunks);  // drain remaining work
    }
  };

  const int workers = std::min(worker_count(), n_chunks);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Accumulator total;
  total.init(rows, n_controls, ctx.analytic);
  for (const auto& acc : chunks) total.merge(acc, ctx.analytic);

  if (total.completed == 0)
    throw std::runtime_error("run_ensemble: every trajectory aborted");
  if (double(total.aborted) > 0.01 * double(cfg.n_traj))
    throw std::runtime_error(
        "run_ensemble: aborted trajectories exceed 1% (first abort: trajectory " +
        std::to_string(total.first_abort_index) + ", step " +
        std::to_string(total.first_abort_step) + ")");

  const double n = double(total.completed);
  EnsembleStats stats;
  stats.n_completed = int(total.completed);
  stats.n_aborted = int(total.aborted);
  stats.times.resize(rows);
  for (int k = 0; k < rows; ++k) stats.times(k) = k * cfg.dt;

  const auto mean_and_se = [&](const Eigen::ArrayXd& sum, const Eigen::ArrayXd& sum2,
                               RealVector& mean, RealVector& se) {
    mean = (sum / n).matrix();
    se.resize(sum.size());
    for (Eigen::Index i = 0; i < sum.size(); ++i) {
      double var = 0.0;
      if (total.completed > 1)
        var = std::max(0.0, (sum2(i) - sum(i) * sum(i) / n) / (n - 1.0));
      se(i) = std::sqrt(var / n);
    }
  };

  mean_and_se(total.sum_f, total.sum_f2, stats.mean_fidelity, stats.se_fidelity);
  stats.mean_x = (total.sum_x / n).matrix();
  stats.mean_y = (total.sum_y / n).matrix();

  stats.mean_theta.resize(rows, n_controls);
  stats.se_theta.resize(rows, n_controls);
  for (int k = 0; k < n_controls; ++k) {
    RealVector mean, se;
    mean_and_se(total.sum_theta.col(k), total.sum_theta2.col(k), mean, se);
    stats.mean_theta.col(k) = mean;
    stats.se_theta.col(k) = se;
  }

  if (ctx.analytic) {
    stats.mean_v = RealVector::Zero(rows);
    stats.applied_fraction = RealVector::Zero(rows);
    for (int k = 0; k < rows; ++k) {
      if (total.applied_count(k) > 0.0) stats.mean_v(k) = total.sum_v(k) / total.applied_count(k);
      stats.applied_fraction(k) = total.applied_count(k) / n;
    }
  }

  stats.t_th = threshold_time(stats.times, stats.mean_fidelity, cfg.f_th);
  stats.eff_time = effective_time(stats.t_th, cfg.f_th, cfg.gamma);

  const int start = final_window_start(rows);
  stats.asymptotic_theta = RealVector::Zero(n_controls);
  for (int k = 0; k < n_controls; ++k)
    stats.asymptotic_theta(k) = stats.mean_theta.col(k).segment(start, rows - start).mean();

  return stats;
}

std::optional<double> threshold_time(const RealVector& times, const RealVector& mean_fidelity,
                                     double f_th) {
  if (times.size() != mean_fidelity.size())
    throw std::invalid_argument("threshold_time: series lengths differ");
  for (Eigen::Index k = 0; k < times.size(); ++k)
    if (mean_fidelity(k) >= f_th) return times(k);
  return std::nullopt;
}

std::optional<double> effective_time(const std::optional<double>& t_th, double f_th,
                                     double gamma) {
  if (!t_th) return std::nullopt;
  if (!(f_th > 0.0)) throw std::invalid_argument("effective_time: f_th must be positive");
  return gamma * *t_th / f_th;
}

std::vector<XiSweepRow> sweep_xi(const SimulationConfig& cfg,
                                 const std::vector<double>& xi_values) {
  std::vector<XiSweepRow> rows;
  rows.reserve(xi_values.size());
  for (double xi : xi_values) {
    SimulationConfig run = cfg;
    run.strategy = BoundedFeedback{xi};
    const EnsembleStats stats = run_ensemble(run);
    rows.push_back({xi, stats.t_th, stats.eff_time, stats.asymptotic_theta});
  }
  return rows;
}

int worker_count() {
  if (const char* env = std::getenv("QWFB_WORKERS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

}  // namespace qwfb
