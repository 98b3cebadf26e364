#include "qwfb/feedback.hpp"

namespace qwfb {

ControlSet hopping_controls(const CycleGraph& g) {
  if (g.n < 3) throw std::invalid_argument("hopping_controls: n must be at least 3");
  ControlSet cs;
  cs.kind = ControlKind::Hopping;
  cs.operators.reserve(g.n);
  for (int k = 0; k < g.n; ++k) {
    ComplexMatrix h = ComplexMatrix::Zero(g.n, g.n);
    h(k, (k + 1) % g.n) = 1.0;
    h((k + 1) % g.n, k) = 1.0;
    cs.operators.push_back(std::move(h));
  }
  return cs;
}

ControlSet onsite_controls(const CycleGraph& g) {
  if (g.n < 3) throw std::invalid_argument("onsite_controls: n must be at least 3");
  ControlSet cs;
  cs.kind = ControlKind::OnSite;
  cs.operators.reserve(g.n);
  for (int k = 0; k < g.n; ++k) {
    ComplexMatrix h = ComplexMatrix::Zero(g.n, g.n);
    h(k, k) = 1.0;
    cs.operators.push_back(std::move(h));
  }
  return cs;
}

ComplexMatrix feedback_hamiltonian(const ControlSet& cs, const FeedbackCouplings& theta) {
  if (theta.size() != cs.size())
    throw std::invalid_argument("feedback_hamiltonian: coupling count mismatch");
  ComplexMatrix h = ComplexMatrix::Zero(cs.dim(), cs.dim());
  for (int k = 0; k < cs.size(); ++k) h += theta(k) * cs.operators[size_t(k)];
  return h;
}

ComplexVector apply_feedback(const ComplexVector& state, const ControlSet& cs,
                             const FeedbackCouplings& theta, double dt) {
  if (cs.dim() != state.size())
    throw std::invalid_argument("apply_feedback: dimension mismatch");
  ComplexVector out = hermitian_exp(feedback_hamiltonian(cs, theta), dt) * state;
  return out / out.norm();
}

}  // namespace qwfb
