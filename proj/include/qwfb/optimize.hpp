#pragma once
// Per-step coupling optimizers: quasi-Newton continuous strategies (with and
// without a box constraint), exhaustive digital feedback over a precomputed
// unitary table, the closed-form single-coupling law, and the
// measurement-plus-feedback step pipeline that composes them.

#include <cstddef>
#include <variant>
#include <vector>

#include "qwfb/feedback.hpp"
#include "qwfb/monitoring.hpp"

namespace qwfb {

struct NoFeedback {};
struct UnboundedFeedback {};
struct BoundedFeedback {
  double xi = 1.0;  // couplings clamped to [-xi, xi] in units of gamma; xi >= 1
};
struct DigitalFeedback {
  std::vector<double> values;  // finite set containing 0, symmetric about 0
};
struct AnalyticSingleFeedback {};

using FeedbackStrategy = std::variant<NoFeedback, UnboundedFeedback, BoundedFeedback,
                                      DigitalFeedback, AnalyticSingleFeedback>;

// Enforces xi >= 1 and the digital value-set invariants.
void validate_strategy(const FeedbackStrategy& strategy);

struct OptimizerSettings {
  double fd_step = 1e-6;  // central finite-difference step, units of gamma
  double tol = 1e-8;      // reward convergence tolerance
  int max_iter = 200;
  // Start each step's search from the previous step's couplings instead of
  // from zero. Off by default: a warm-started search can park indefinitely
  // in distant high-coupling optima of equal reward, which distorts the
  // averaged-coupling statistics even though the fidelity is unaffected.
  bool warm_start = false;
};

// |<target| exp(-i H_fb(theta) dt) |psi>|^2, the per-step objective.
double feedback_reward(const ComplexVector& post_meas_state, const ControlSet& cs,
                       const FeedbackCouplings& theta, double dt, int target);

// Local maximization of the reward by quasi-Newton ascent with
// finite-difference gradients. The returned reward never falls below the
// reward at theta = 0 nor below the reward at the (clamped) warm start.
FeedbackCouplings optimize_unbounded(const ComplexVector& post_meas_state, const ControlSet& cs,
                                     double dt, int target, const OptimizerSettings& settings,
                                     const FeedbackCouplings* warm_theta = nullptr);

// Same ascent restricted to the box [-xi, xi]^n by projection; with an
// inactive box the iterates coincide with optimize_unbounded.
FeedbackCouplings optimize_bounded(const ComplexVector& post_meas_state, const ControlSet& cs,
                                   double dt, double xi, int target,
                                   const OptimizerSettings& settings,
                                   const FeedbackCouplings* warm_theta = nullptr);

// One row per coupling combination: the feedback unitary, the target row
// <target|U (reward via one dot product), and the tie-break keys.
struct DigitalUnitaryTable {
  double dt = 0.0;
  int target = 0;
  std::vector<double> values;           // sorted ascending
  RealMatrix thetas;                    // combination index -> coupling vector
  std::vector<ComplexMatrix> unitaries;
  ComplexMatrix target_rows;            // row c = <target| U_c
  RealVector norm2;                     // squared coupling norm per combination

  std::size_t size() const { return unitaries.size(); }
};

// Enumerates values^n in lexicographic order of the coupling vector.
// Rejects combination counts above 10^7.
DigitalUnitaryTable precompute_digital_unitaries(const ControlSet& cs,
                                                 const std::vector<double>& values, double dt,
                                                 int target);

// Exact argmax over the table. Rewards within 1e-12 of the maximum count as
// ties, resolved by smallest coupling norm, then lexicographic order.
std::size_t digital_argmax(const ComplexVector& post_meas_state, const DigitalUnitaryTable& table);

FeedbackCouplings optimize_digital(const ComplexVector& post_meas_state,
                                   const DigitalUnitaryTable& table);
FeedbackCouplings optimize_digital(const ComplexVector& post_meas_state, const ControlSet& cs,
                                   double dt, const std::vector<double>& values, int target = 0);

// Output of the single-collective-coupling law: theta_tilde = theta * dt is
// the rotation applied this step; `applied` is false when either the
// curvature denominator degenerates or the second-derivative certificate v
// is not negative, in which case theta_tilde is forced to 0.
struct AnalyticFeedbackResult {
  double theta_tilde = 0.0;
  bool applied = false;
  double v = 0.0;
};

// Closed-form feedback coupling for H_fb = theta * h_fb with h_fb the sum of
// all hopping controls. rho is the pre-measurement state, dW the Wiener
// increments of the two quadrature channels.
AnalyticFeedbackResult analytic_single_feedback(const ComplexMatrix& rho, const ComplexMatrix& cx,
                                                const ComplexMatrix& cy, const ComplexMatrix& h_fb,
                                                const RealVector& dW, double dt, double kappa,
                                                int target = 0);

struct StepOptions {
  OptimizerSettings opt{};
  int target = 0;
  const KrausAssembler* kraus = nullptr;               // optional hot-path reuse
  const DigitalUnitaryTable* digital_table = nullptr;  // required for DigitalFeedback
  const ComplexMatrix* collective_control = nullptr;   // required for AnalyticSingleFeedback
};

struct FeedbackStepResult {
  ComplexVector state;
  FeedbackCouplings theta;
  MeasurementStep meas;
  bool analytic_applied = false;
  double analytic_v = 0.0;
};

// One full protocol step: sample increments -> Milstein Kraus -> conditional
// pure update -> strategy-specific coupling choice -> feedback unitary.
FeedbackStepResult feedback_step(const ComplexVector& state, const ComplexMatrix& h_s,
                                 const MonitoringSetup& m, const ControlSet& cs,
                                 const FeedbackStrategy& strategy, double dt, RandomStream& rng,
                                 const StepOptions& opts,
                                 const FeedbackCouplings* warm_theta = nullptr);

}  // namespace qwfb
