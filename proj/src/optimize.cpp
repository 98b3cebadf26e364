#include "qwfb/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "qwfb/lindblad.hpp"

namespace qwfb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> canonical_values(const std::vector<double>& values) {
  if (values.empty())
    throw std::invalid_argument("digital feedback: value set must not be empty");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (std::find(v.begin(), v.end(), 0.0) == v.end())
    throw std::invalid_argument("digital feedback: value set must contain 0");
  for (double x : v)
    if (!std::binary_search(v.begin(), v.end(), -x))
      throw std::invalid_argument("digital feedback: value set must be symmetric about 0");
  return v;
}

// Reward evaluation workspace. Control operators on the cycle are real
// symmetric, so the hot path diagonalizes a real matrix and reconstructs
// only the target amplitude of exp(-i H_fb dt)|psi>.
class RewardEvaluator {
 public:
  RewardEvaluator(const ControlSet& cs, double dt, int target)
      : cs_(cs), dt_(dt), target_(target), dim_(cs.dim()), n_ops_(cs.size()) {
    if (target < 0 || target >= dim_)
      throw std::out_of_range("feedback reward: target index out of range");
    real_ = true;
    for (const auto& op : cs.operators)
      if (op.imag().cwiseAbs().maxCoeff() != 0.0) {
        real_ = false;
        break;
      }
    if (real_) {
      entries_.resize(size_t(n_ops_));
      for (int k = 0; k < n_ops_; ++k) {
        const auto& op = cs.operators[size_t(k)];
        for (int i = 0; i < dim_; ++i)
          for (int j = 0; j <= i; ++j)
            if (op(i, j) != Complex(0.0, 0.0))
              entries_[size_t(k)].push_back({i, j, op(i, j).real()});
      }
      h_real_.resize(dim_, dim_);
      wr_.resize(dim_);
      wi_.resize(dim_);
    }
  }

  double operator()(const FeedbackCouplings& theta, const ComplexVector& psi) {
    if (theta.size() != n_ops_)
      throw std::invalid_argument("feedback reward: coupling count mismatch");
    if (!real_) {
      const ComplexMatrix u = hermitian_exp(feedback_hamiltonian(cs_, theta), dt_);
      return std::norm((u.row(target_) * psi).value());
    }
    h_real_.setZero();
    for (int k = 0; k < n_ops_; ++k)
      for (const auto& e : entries_[size_t(k)]) h_real_(e.row, e.col) += theta(k) * e.value;
    solver_.compute(h_real_);  // reads the lower triangle
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("feedback reward: eigendecomposition failed");
    const RealMatrix& v = solver_.eigenvectors();
    wr_.noalias() = v.transpose() * psi.real();
    wi_.noalias() = v.transpose() * psi.imag();
    Complex amp(0.0, 0.0);
    for (int m = 0; m < dim_; ++m) {
      const double phase = -dt_ * solver_.eigenvalues()(m);
      amp += v(target_, m) * Complex(std::cos(phase), std::sin(phase)) *
             Complex(wr_(m), wi_(m));
    }
    return std::norm(amp);
  }

 private:
  struct Entry {
    int row, col;
    double value;
  };

  const ControlSet& cs_;
  double dt_;
  int target_;
  int dim_, n_ops_;
  bool real_ = false;
  std::vector<std::vector<Entry>> entries_;
  RealMatrix h_real_;
  RealVector wr_, wi_;
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver_;
};

struct BoxResult {
  FeedbackCouplings theta;
  double reward;
};

constexpr double kBasinCap = 3.14159265358979323846;

// One optimization step may spend at most this much total rotation angle,
// ||theta * dt||_2 <= pi/2. The reward is 2*pi periodic in each rotation
// angle, so this keeps the search inside the principal basin (the maximum
// found is local in the periodic landscape) and bounds how far a single
// feedback application can transport the walker. Box corners of every
// practical bounded run lie inside the ball, so only the unbounded strategy
// ever feels it.
constexpr double kStepRotationBudget = 3.14159265358979323846;

// Quasi-Newton ascent (BFGS on the negated reward) with coordinatewise
// clamping to [lo, hi] and a projected Armijo backtracking line search.
// With an inactive box the iterates are identical to the unconstrained run.
// basin_scale converts couplings to rotation angles (it is the step dt).
BoxResult quasi_newton_box(RewardEvaluator& eval, const ComplexVector& psi,
                           FeedbackCouplings x, double lo, double hi, double basin_scale,
                           const OptimizerSettings& s) {
  const auto clamp = [&](const RealVector& v) -> RealVector {
    RealVector out = v.cwiseMax(lo).cwiseMin(hi);
    const double rotation = basin_scale * out.norm();
    if (rotation > kStepRotationBudget) out *= kStepRotationBudget / rotation;
    return out;
  };
  const auto f = [&](const RealVector& v) { return -eval(v, psi); };
  const Eigen::Index n = x.size();

  x = clamp(x);
  double fx = f(x);
  RealVector g(n), gt(n), probe(n);
  const auto grad = [&](const RealVector& at, RealVector& out) {
    probe = at;
    for (Eigen::Index i = 0; i < n; ++i) {
      probe(i) = at(i) + s.fd_step;
      const double fp = f(probe);
      probe(i) = at(i) - s.fd_step;
      const double fm = f(probe);
      probe(i) = at(i);
      out(i) = (fp - fm) / (2.0 * s.fd_step);
    }
  };
  grad(x, g);

  RealMatrix h_inv = RealMatrix::Identity(n, n);
  FeedbackCouplings best_x = x;
  double best_f = fx;

  for (int it = 0; it < s.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-8) break;
    RealVector d = -(h_inv * g);
    if (d.dot(g) >= 0.0) {
      h_inv.setIdentity();
      d = -g;
    }

    // First trial step capped to one basin width of the feedback rotation
    // (the reward is 2*pi periodic in theta*dt along each control), so the
    // ascent stays in the nearest basin instead of hopping to an equivalent
    // optimum with huge couplings.
    const double dnorm = d.norm();
    double alpha = std::min(1.0, kBasinCap / (dnorm * basin_scale));
    RealVector xt;
    double ft = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xt = clamp(x + alpha * d);
      const RealVector step = xt - x;
      if (step.squaredNorm() == 0.0) break;  // pinned against the box
      const double gstep = g.dot(step);
      if (gstep < 0.0) {
        ft = f(xt);
        if (ft <= fx + 1e-4 * gstep) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    grad(xt, gt);
    const RealVector sv = xt - x;
    const RealVector yv = gt - g;
    const double sy = sv.dot(yv);
    if (it == 0 && sy > 0.0) {
      const double yy = yv.squaredNorm();
      if (yy > 0.0) h_inv *= sy / yy;
    }
    if (sy > 1e-12 * sv.norm() * yv.norm()) {
      const RealVector hy = h_inv * yv;
      const double yhy = yv.dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (sv * sv.transpose());
      const RealMatrix cross = hy * sv.transpose();
      h_inv -= (cross + cross.transpose()) / sy;
    }

    const double improvement = fx - ft;
    x = xt;
    fx = ft;
    g = gt;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    // The reward curvature is O(dt^2), so the first (unscaled) step barely
    // moves; judge convergence only once the inverse Hessian is rescaled.
    if (it > 0 && improvement < s.tol) break;
  }
  return {best_x, -best_f};
}

FeedbackCouplings optimize_box(const ComplexVector& psi, const ControlSet& cs, double dt,
                               double lo, double hi, int target, const OptimizerSettings& s,
                               const FeedbackCouplings* warm) {
  RewardEvaluator eval(cs, dt, target);
  const FeedbackCouplings zero = FeedbackCouplings::Zero(cs.size());
  FeedbackCouplings start = zero;
  if (warm != nullptr) {
    if (warm->size() != cs.size())
      throw std::invalid_argument("optimizer: warm-start coupling count mismatch");
    if (s.warm_start) start = warm->cwiseMax(lo).cwiseMin(hi);
  }

  BoxResult res = quasi_newton_box(eval, psi, start, lo, hi, dt, s);

  // The comparison set always contains theta = 0 and the (clamped) warm
  // start, so optimized feedback never underperforms either.
  double best_reward = res.reward;
  FeedbackCouplings best = res.theta;
  const double r_zero = eval(zero, psi);
  if (r_zero > best_reward) {
    best_reward = r_zero;
    best = zero;
  }
  if (warm != nullptr) {
    const FeedbackCouplings clamped = warm->cwiseMax(lo).cwiseMin(hi);
    const double r_warm = eval(clamped, psi);
    if (r_warm > best_reward) {
      best_reward = r_warm;
      best = clamped;
    }
  }
  return best;
}

}  // namespace

void validate_strategy(const FeedbackStrategy& strategy) {
  std::visit(overloaded{
                 [](const NoFeedback&) {},
                 [](const UnboundedFeedback&) {},
                 [](const AnalyticSingleFeedback&) {},
                 [](const BoundedFeedback& b) {
                   if (!(b.xi >= 1.0))
                     throw std::invalid_argument("bounded feedback: xi must be >= 1");
                 },
                 [](const DigitalFeedback& d) { canonical_values(d.values); },
             },
             strategy);
}

double feedback_reward(const ComplexVector& post_meas_state, const ControlSet& cs,
                       const FeedbackCouplings& theta, double dt, int target) {
  RewardEvaluator eval(cs, dt, target);
  return eval(theta, post_meas_state);
}

FeedbackCouplings optimize_unbounded(const ComplexVector& post_meas_state, const ControlSet& cs,
                                     double dt, int target, const OptimizerSettings& settings,
                                     const FeedbackCouplings* warm_theta) {
  const double inf = std::numeric_limits<double>::infinity();
  return optimize_box(post_meas_state, cs, dt, -inf, inf, target, settings, warm_theta);
}

FeedbackCouplings optimize_bounded(const ComplexVector& post_meas_state, const ControlSet& cs,
                                   double dt, double xi, int target,
                                   const OptimizerSettings& settings,
                                   const FeedbackCouplings* warm_theta) {
  if (!(xi >= 1.0)) throw std::invalid_argument("optimize_bounded: xi must be >= 1");
  return optimize_box(post_meas_state, cs, dt, -xi, xi, target, settings, warm_theta);
}

DigitalUnitaryTable precompute_digital_unitaries(const ControlSet& cs,
                                                 const std::vector<double>& values, double dt,
                                                 int target) {
  const std::vector<double> v = canonical_values(values);
  const int n = cs.size();
  const int d = cs.dim();
  if (target < 0 || target >= d)
    throw std::out_of_range("precompute_digital_unitaries: target index out of range");
  if (std::pow(double(v.size()), double(n)) > 1e7)
    throw std::invalid_argument("digital feedback: combination count exceeds 10^7");
  std::size_t count = 1;
  for (int k = 0; k < n; ++k) count *= v.size();

  DigitalUnitaryTable table;
  table.dt = dt;
  table.target = target;
  table.values = v;
  table.thetas.resize(Eigen::Index(count), n);
  table.target_rows.resize(Eigen::Index(count), d);
  table.norm2.resize(Eigen::Index(count));
  table.unitaries.reserve(count);

  FeedbackCouplings theta(n);
  for (std::size_t c = 0; c < count; ++c) {
    std::size_t rem = c;
    for (int k = n - 1; k >= 0; --k) {
      theta(k) = v[rem % v.size()];
      rem /= v.size();
    }
    ComplexMatrix u = hermitian_exp(feedback_hamiltonian(cs, theta), dt);
    table.thetas.row(Eigen::Index(c)) = theta;
    table.target_rows.row(Eigen::Index(c)) = u.row(target);
    table.norm2(Eigen::Index(c)) = theta.squaredNorm();
    table.unitaries.push_back(std::move(u));
  }
  return table;
}

std::size_t digital_argmax(const ComplexVector& post_meas_state,
                           const DigitalUnitaryTable& table) {
  if (post_meas_state.size() != table.target_rows.cols())
    throw std::invalid_argument("digital_argmax: state dimension mismatch");
  thread_local ComplexVector amps;
  amps.noalias() = table.target_rows * post_meas_state;

  const Eigen::Index count = amps.size();
  double r_max = 0.0;
  for (Eigen::Index c = 0; c < count; ++c) r_max = std::max(r_max, std::norm(amps(c)));

  // Rewards within 1e-12 of the maximum tie; break by smallest norm, then by
  // the (lexicographic) enumeration order.
  constexpr double tie = 1e-12;
  Eigen::Index best = -1;
  for (Eigen::Index c = 0; c < count; ++c) {
    if (std::norm(amps(c)) < r_max - tie) continue;
    if (best < 0 || table.norm2(c) < table.norm2(best)) best = c;
  }
  return std::size_t(best);
}

FeedbackCouplings optimize_digital(const ComplexVector& post_meas_state,
                                   const DigitalUnitaryTable& table) {
  return table.thetas.row(Eigen::Index(digital_argmax(post_meas_state, table)));
}

FeedbackCouplings optimize_digital(const ComplexVector& post_meas_state, const ControlSet& cs,
                                   double dt, const std::vector<double>& values, int target) {
  return optimize_digital(post_meas_state,
                          precompute_digital_unitaries(cs, values, dt, target));
}

AnalyticFeedbackResult analytic_single_feedback(const ComplexMatrix& rho, const ComplexMatrix& cx,
                                                const ComplexMatrix& cy, const ComplexMatrix& h_fb,
                                                const RealVector& dW, double dt, double kappa,
                                                int target) {
  const Eigen::Index d = rho.rows();
  if (cx.rows() != d || cy.rows() != d || h_fb.rows() != d)
    throw std::invalid_argument("analytic_single_feedback: dimension mismatch");
  if (dW.size() != 2)
    throw std::invalid_argument("analytic_single_feedback: expected two Wiener increments");
  if (target < 0 || target >= d)
    throw std::out_of_range("analytic_single_feedback: target index out of range");

  const auto comm = [](const ComplexMatrix& a, const ComplexMatrix& b) -> ComplexMatrix {
    return a * b - b * a;
  };
  const Complex minus_i(0.0, -1.0);
  const double sqrt_kappa = std::sqrt(kappa);

  const ComplexMatrix comm_rho = comm(h_fb, rho);
  const double den = comm(h_fb, comm_rho)(target, target).real();

  const std::array<ComplexMatrix, 2> meas_sup = {measurement_superop(cx, rho),
                                                 measurement_superop(cy, rho)};
  const std::array<ComplexMatrix, 2> comm_meas = {comm(h_fb, meas_sup[0]),
                                                  comm(h_fb, meas_sup[1])};
  const ComplexMatrix diss_sum = kappa * (dissipator(cx, rho) + dissipator(cy, rho));

  AnalyticFeedbackResult out;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0.0;
  const bool degenerate = std::abs(den) < 1e-9;

  ComplexMatrix t_sum = diss_sum;
  if (!degenerate) {
    for (int j = 0; j < 2; ++j)
      a(j) = (minus_i * sqrt_kappa * comm_meas[size_t(j)](target, target) / den).real();
    const ComplexMatrix diss_fb = dissipator(h_fb, rho);
    for (int j = 0; j < 2; ++j)
      t_sum += minus_i * sqrt_kappa * a(j) * comm_meas[size_t(j)] +
               (a(j) * a(j)) * diss_fb;
    b = (minus_i * comm(h_fb, t_sum)(target, target) / den).real();
    out.theta_tilde = a(0) * dW(0) + a(1) * dW(1) + b * dt;
  }

  // Reconstructed next-step state with every superoperator term evaluated at
  // the current state (explicit scheme).
  ComplexMatrix rho_next = rho;
  for (int j = 0; j < 2; ++j)
    rho_next += (sqrt_kappa * meas_sup[size_t(j)] + minus_i * a(j) * comm_rho) * dW(j);
  rho_next += (t_sum + minus_i * b * comm_rho) * dt;
  out.v = -comm(h_fb, comm(h_fb, rho_next))(target, target).real();

  out.applied = !degenerate && out.v < 0.0;
  if (!out.applied) out.theta_tilde = 0.0;
  return out;
}

FeedbackStepResult feedback_step(const ComplexVector& state, const ComplexMatrix& h_s,
                                 const MonitoringSetup& m, const ControlSet& cs,
                                 const FeedbackStrategy& strategy, double dt, RandomStream& rng,
                                 const StepOptions& opts, const FeedbackCouplings* warm_theta) {
  FeedbackStepResult out;
  out.meas = sample_increments(state, m, dt, rng);

  ComplexVector post;
  if (opts.kraus != nullptr) {
    thread_local ComplexMatrix kraus;
    opts.kraus->assemble(out.meas, kraus);
    post = conditional_pure_update(state, kraus);
  } else {
    post = conditional_pure_update(state, kraus_milstein(h_s, m, dt, out.meas));
  }

  std::visit(
      overloaded{
          [&](const NoFeedback&) {
            out.theta = FeedbackCouplings::Zero(cs.size());
            out.state = std::move(post);
          },
          [&](const UnboundedFeedback&) {
            const FeedbackCouplings* warm = opts.opt.warm_start ? warm_theta : nullptr;
            out.theta = optimize_unbounded(post, cs, dt, opts.target, opts.opt, warm);
            out.state = apply_feedback(post, cs, out.theta, dt);
          },
          [&](const BoundedFeedback& bounded) {
            const FeedbackCouplings* warm = opts.opt.warm_start ? warm_theta : nullptr;
            out.theta = optimize_bounded(post, cs, dt, bounded.xi, opts.target, opts.opt, warm);
            out.state = apply_feedback(post, cs, out.theta, dt);
          },
          [&](const DigitalFeedback&) {
            if (opts.digital_table == nullptr)
              throw std::invalid_argument(
                  "feedback_step: digital strategy requires a precomputed unitary table");
            const std::size_t idx = digital_argmax(post, *opts.digital_table);
            out.theta = opts.digital_table->thetas.row(Eigen::Index(idx));
            ComplexVector rotated = opts.digital_table->unitaries[idx] * post;
            out.state = rotated / rotated.norm();
          },
          [&](const AnalyticSingleFeedback&) {
            if (opts.collective_control == nullptr)
              throw std::invalid_argument(
                  "feedback_step: analytic strategy requires the collective control operator");
            if (m.channels.size() != 2)
              throw std::invalid_argument(
                  "feedback_step: analytic strategy requires both quadrature channels");
            const ComplexMatrix rho = state * state.adjoint();
            const AnalyticFeedbackResult res = analytic_single_feedback(
                rho, m.channels[0].op, m.channels[1].op, *opts.collective_control, out.meas.dW,
                dt, m.channels[0].kappa, opts.target);
            out.analytic_applied = res.applied;
            out.analytic_v = res.v;
            out.theta = FeedbackCouplings::Constant(cs.size(), res.theta_tilde / dt);
            if (res.applied) {
              ComplexVector rotated =
                  hermitian_exp(*opts.collective_control, res.theta_tilde) * post;
              out.state = rotated / rotated.norm();
            } else {
              out.state = std::move(post);
            }
          },
      },
      strategy);
  return out;
}

}  // namespace qwfb
