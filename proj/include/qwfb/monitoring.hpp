#pragma once
// Continuous homodyne monitoring of the walker position: jump-operator
// channels, measurement-record sampling, the Milstein-corrected Kraus
// operator and conditional state updates (pure and mixed).

#include <stdexcept>
#include <string>
#include <vector>

#include "qwfb/graph.hpp"
#include "qwfb/qcore.hpp"
#include "qwfb/rng.hpp"

namespace qwfb {

struct MonitoredChannel {
  ComplexMatrix op;    // jump operator (Hermitian for all channels used here)
  double kappa = 1.0;  // measurement rate, units of gamma
  double eta = 1.0;    // detection efficiency in [0, 1]
};

struct MonitoringSetup {
  std::vector<MonitoredChannel> channels;

  int dim() const { return channels.empty() ? 0 : int(channels.front().op.rows()); }
  void validate() const;  // kappa >= 0, eta in [0, 1], all dims equal
};

struct MeasurementStep {
  RealVector dW;  // Wiener increments, one entry per channel
  RealVector dy;  // photocurrent increments, one entry per channel
};

struct PositionQuadratures {
  ComplexMatrix x;  // diag(cos(2 pi k / n))
  ComplexMatrix y;  // diag(sin(2 pi k / n))
};

// Thrown when a conditional update collapses the state norm below 1e-14; the
// trajectory runner enriches it with seed and step before reporting.
struct DegenerateMeasurementError : std::runtime_error {
  explicit DegenerateMeasurementError(const std::string& what)
      : std::runtime_error(what) {}
};

// The two diagonal quadrature operators whose eigenvalue lists equal the
// planar node coordinates.
PositionQuadratures position_jump_operators(const CycleGraph& g);

// Two-channel setup monitoring both quadratures with a common rate and
// efficiency.
MonitoringSetup xy_monitoring(const CycleGraph& g, double kappa = 1.0, double eta = 1.0);

// dy_j = sqrt(eta_j kappa_j) <c_j + c_j^dag> dt + dW_j for the given Wiener
// increments (the eta factor is 1 on the pure-state path).
MeasurementStep assemble_increments(const ComplexVector& state, const MonitoringSetup& m,
                                    double dt, const RealVector& dW);

// Draws dW_j ~ Normal(0, dt) independently per channel and assembles dy.
MeasurementStep sample_increments(const ComplexVector& state, const MonitoringSetup& m,
                                  double dt, RandomStream& rng);

// Precomputes the record-independent pieces of the Milstein-corrected Kraus
// operator; assemble() is the hot-path equivalent of kraus_milstein().
class KrausAssembler {
 public:
  KrausAssembler(const ComplexMatrix& h_s, const MonitoringSetup& m, double dt);

  void assemble(const MeasurementStep& step, ComplexMatrix& out) const;
  ComplexMatrix assemble(const MeasurementStep& step) const;

 private:
  ComplexMatrix fixed_;                // I - i H dt - sum_j (kappa_j/2) c_j^dag c_j dt
  std::vector<ComplexMatrix> linear_;  // sqrt(eta_j kappa_j) c_j
  std::vector<ComplexMatrix> quad_;    // (eta_j kappa_j / 2) c_j^2
  double dt_;
};

// M = I - i H dt
//       - sum_j [ (kappa_j/2) c_j^dag c_j dt - sqrt(eta_j kappa_j) c_j dy_j
//                 - (eta_j kappa_j / 2) c_j^2 (dy_j^2 - dt) ]
// The last term is the Euler-Milstein correction for finite dt.
ComplexMatrix kraus_milstein(const ComplexMatrix& h_s, const MonitoringSetup& m,
                             double dt, const MeasurementStep& step);

// |psi'> = M|psi> / ||M|psi>||; throws DegenerateMeasurementError when the
// norm falls below 1e-14.
ComplexVector conditional_pure_update(const ComplexVector& state, const ComplexMatrix& kraus);

// rho' = (M rho M^dag + sum_j (1 - eta_j) kappa_j c_j rho c_j^dag dt) / trace,
// re-Hermitized. Coincides with the pure update at eta = 1.
ComplexMatrix conditional_mixed_update(const ComplexMatrix& rho, const ComplexMatrix& kraus,
                                       const MonitoringSetup& m, double dt);

}  // namespace qwfb
