#pragma once
// Feedback control operators on the cycle and application of the per-step
// feedback unitary.

#include <vector>

#include "qwfb/graph.hpp"
#include "qwfb/qcore.hpp"

namespace qwfb {

enum class ControlKind { Hopping, OnSite };

struct ControlSet {
  ControlKind kind = ControlKind::Hopping;
  std::vector<ComplexMatrix> operators;

  int size() const { return int(operators.size()); }
  int dim() const { return operators.empty() ? 0 : int(operators.front().rows()); }
};

// theta_k per control operator, units of gamma.
using FeedbackCouplings = RealVector;

// h_k = |k><k+1| + |k+1><k| with |n> = |0>; one operator per edge, so the
// operator sum equals the adjacency matrix.
ControlSet hopping_controls(const CycleGraph& g);

// h_k = |k><k|; diagonal projectors whose feedback unitary only imprints
// phases on position eigenstates.
ControlSet onsite_controls(const CycleGraph& g);

// H_fb(theta) = sum_k theta_k h_k.
ComplexMatrix feedback_hamiltonian(const ControlSet& cs, const FeedbackCouplings& theta);

// exp(-i H_fb(theta) dt) |state>, renormalized.
ComplexVector apply_feedback(const ComplexVector& state, const ControlSet& cs,
                             const FeedbackCouplings& theta, double dt);

}  // namespace qwfb
