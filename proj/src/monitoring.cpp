#include "qwfb/monitoring.hpp"

#include <cmath>

namespace qwfb {

void MonitoringSetup::validate() const {
  const int d = dim();
  for (const auto& ch : channels) {
    if (ch.op.rows() != d || ch.op.cols() != d)
      throw std::invalid_argument("MonitoringSetup: channel dimensions differ");
    if (!(ch.kappa >= 0.0))
      throw std::invalid_argument("MonitoringSetup: kappa must be >= 0");
    if (!(ch.eta >= 0.0 && ch.eta <= 1.0))
      throw std::invalid_argument("MonitoringSetup: eta must lie in [0, 1]");
  }
}

PositionQuadratures position_jump_operators(const CycleGraph& g) {
  const auto pts = node_coordinates(g);
  ComplexVector cx(g.n), cy(g.n);
  for (int k = 0; k < g.n; ++k) {
    cx(k) = pts[k].x;
    cy(k) = pts[k].y;
  }
  return {ComplexMatrix(cx.asDiagonal()), ComplexMatrix(cy.asDiagonal())};
}

MonitoringSetup xy_monitoring(const CycleGraph& g, double kappa, double eta) {
  auto [x, y] = position_jump_operators(g);
  MonitoringSetup m;
  m.channels.push_back({std::move(x), kappa, eta});
  m.channels.push_back({std::move(y), kappa, eta});
  m.validate();
  return m;
}

MeasurementStep assemble_increments(const ComplexVector& state, const MonitoringSetup& m,
                                    double dt, const RealVector& dW) {
  if (dW.size() != Eigen::Index(m.channels.size()))
    throw std::invalid_argument("assemble_increments: one dW entry per channel required");
  if (!(dt > 0.0)) throw std::invalid_argument("assemble_increments: dt must be positive");
  MeasurementStep step;
  step.dW = dW;
  step.dy.resize(dW.size());
  for (Eigen::Index j = 0; j < dW.size(); ++j) {
    const auto& ch = m.channels[size_t(j)];
    const double signal = (state.adjoint() * ((ch.op + ch.op.adjoint()) * state)).value().real();
    step.dy(j) = std::sqrt(ch.eta * ch.kappa) * signal * dt + dW(j);
  }
  return step;
}

MeasurementStep sample_increments(const ComplexVector& state, const MonitoringSetup& m,
                                  double dt, RandomStream& rng) {
  RealVector dW(Eigen::Index(m.channels.size()));
  const double scale = std::sqrt(dt);
  for (Eigen::Index j = 0; j < dW.size(); ++j) dW(j) = scale * rng.normal();
  return assemble_increments(state, m, dt, dW);
}

KrausAssembler::KrausAssembler(const ComplexMatrix& h_s, const MonitoringSetup& m, double dt)
    : dt_(dt) {
  const int d = int(h_s.rows());
  if (h_s.cols() != d) throw std::invalid_argument("KrausAssembler: H must be square");
  if (m.dim() != 0 && m.dim() != d)
    throw std::invalid_argument("KrausAssembler: channel dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("KrausAssembler: dt must be positive");

  fixed_ = ComplexMatrix::Identity(d, d) - Complex(0.0, dt) * h_s;
  for (const auto& ch : m.channels) {
    fixed_ -= (0.5 * ch.kappa * dt) * (ch.op.adjoint() * ch.op);
    linear_.push_back(std::sqrt(ch.eta * ch.kappa) * ch.op);
    quad_.push_back((0.5 * ch.eta * ch.kappa) * (ch.op * ch.op));
  }
}

void KrausAssembler::assemble(const MeasurementStep& step, ComplexMatrix& out) const {
  if (step.dy.size() != Eigen::Index(linear_.size()))
    throw std::invalid_argument("KrausAssembler: record size mismatch");
  out = fixed_;
  for (Eigen::Index j = 0; j < step.dy.size(); ++j) {
    const double dy = step.dy(j);
    out += dy * linear_[size_t(j)];
    out += (dy * dy - dt_) * quad_[size_t(j)];
  }
}

ComplexMatrix KrausAssembler::assemble(const MeasurementStep& step) const {
  ComplexMatrix out;
  assemble(step, out);
  return out;
}

ComplexMatrix kraus_milstein(const ComplexMatrix& h_s, const MonitoringSetup& m,
                             double dt, const MeasurementStep& step) {
  return KrausAssembler(h_s, m, dt).assemble(step);
}

ComplexVector conditional_pure_update(const ComplexVector& state, const ComplexMatrix& kraus) {
  if (kraus.cols() != state.size())
    throw std::invalid_argument("conditional_pure_update: dimension mismatch");
  ComplexVector updated = kraus * state;
  const double norm = updated.norm();
  if (norm <= 1e-14)
    throw DegenerateMeasurementError("conditional update collapsed the state norm");
  return updated / norm;
}

ComplexMatrix conditional_mixed_update(const ComplexMatrix& rho, const ComplexMatrix& kraus,
                                       const MonitoringSetup& m, double dt) {
  if (kraus.rows() != rho.rows() || kraus.cols() != rho.cols())
    throw std::invalid_argument("conditional_mixed_update: dimension mismatch");
  ComplexMatrix numerator = kraus * rho * kraus.adjoint();
  for (const auto& ch : m.channels) {
    if (ch.eta < 1.0)
      numerator += ((1.0 - ch.eta) * ch.kappa * dt) * (ch.op * rho * ch.op.adjoint());
  }
  const double tr = numerator.trace().real();
  if (tr <= 1e-14)
    throw DegenerateMeasurementError("conditional update collapsed the state trace");
  numerator /= tr;
  return 0.5 * (numerator + numerator.adjoint());
}

}  // namespace qwfb
