#pragma once
// Unconditional (trajectory-averaged) evolution: the Lindblad superoperators,
// an RK4 integrator for the master equation, and the single index-operator
// monitoring used to probe symmetry of the dynamics.

#include "qwfb/monitoring.hpp"

namespace qwfb {

// D[c]rho = c rho c^dag - (c^dag c rho + rho c^dag c)/2. Traceless.
ComplexMatrix dissipator(const ComplexMatrix& c, const ComplexMatrix& rho);

// H[c]rho = c rho + rho c^dag - Tr[(c + c^dag) rho] rho. Traceless,
// Hermiticity-preserving.
ComplexMatrix measurement_superop(const ComplexMatrix& c, const ComplexMatrix& rho);

// drho/dt = -i [H, rho] + sum_j kappa_j D[c_j] rho.
ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const ComplexMatrix& h_s,
                           const MonitoringSetup& m);

// One classical RK4 step of the master equation, re-Hermitized.
ComplexMatrix lindblad_step(const ComplexMatrix& rho, const ComplexMatrix& h_s,
                            const MonitoringSetup& m, double dt);

// diag(0, 1, ..., n-1): a single position-diagonal jump operator that labels
// the nodes and breaks the translational symmetry of the cycle.
ComplexMatrix index_jump_operator(const CycleGraph& g);

MonitoringSetup index_monitoring(const CycleGraph& g, double kappa = 1.0, double eta = 1.0);

struct PopulationsSeries {
  RealVector times;
  RealMatrix populations;      // one row per recorded time, one column per node
  RealVector max_offdiagonal;  // largest |rho_jk|, j != k, per recorded time
};

// Evolves the uniform-superposition projector and records the position-basis
// diagonal at every step.
PopulationsSeries populations_series(const CycleGraph& g, const ComplexMatrix& h_s,
                                     const MonitoringSetup& m, double dt, int steps);

}  // namespace qwfb
