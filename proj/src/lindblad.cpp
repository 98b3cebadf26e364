#include "qwfb/lindblad.hpp"

namespace qwfb {

namespace {
void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}
}  // namespace

ComplexMatrix dissipator(const ComplexMatrix& c, const ComplexMatrix& rho) {
  require_same_dim(c, rho, "dissipator");
  const ComplexMatrix cdc = c.adjoint() * c;
  return c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
}

ComplexMatrix measurement_superop(const ComplexMatrix& c, const ComplexMatrix& rho) {
  require_same_dim(c, rho, "measurement_superop");
  const Complex signal = ((c + c.adjoint()) * rho).trace();
  return c * rho + rho * c.adjoint() - signal * rho;
}

ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const ComplexMatrix& h_s,
                           const MonitoringSetup& m) {
  require_same_dim(h_s, rho, "lindblad_rhs");
  ComplexMatrix rhs = Complex(0.0, -1.0) * (h_s * rho - rho * h_s);
  for (const auto& ch : m.channels) rhs += ch.kappa * dissipator(ch.op, rho);
  return rhs;
}

ComplexMatrix lindblad_step(const ComplexMatrix& rho, const ComplexMatrix& h_s,
                            const MonitoringSetup& m, double dt) {
  const ComplexMatrix k1 = lindblad_rhs(rho, h_s, m);
  const ComplexMatrix k2 = lindblad_rhs(rho + (0.5 * dt) * k1, h_s, m);
  const ComplexMatrix k3 = lindblad_rhs(rho + (0.5 * dt) * k2, h_s, m);
  const ComplexMatrix k4 = lindblad_rhs(rho + dt * k3, h_s, m);
  ComplexMatrix next = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return 0.5 * (next + next.adjoint());
}

ComplexMatrix index_jump_operator(const CycleGraph& g) {
  if (g.n < 3) throw std::invalid_argument("index_jump_operator: n must be at least 3");
  ComplexVector diag(g.n);
  for (int k = 0; k < g.n; ++k) diag(k) = double(k);
  return ComplexMatrix(diag.asDiagonal());
}

MonitoringSetup index_monitoring(const CycleGraph& g, double kappa, double eta) {
  MonitoringSetup m;
  m.channels.push_back({index_jump_operator(g), kappa, eta});
  m.validate();
  return m;
}

PopulationsSeries populations_series(const CycleGraph& g, const ComplexMatrix& h_s,
                                     const MonitoringSetup& m, double dt, int steps) {
  if (steps < 1) throw std::invalid_argument("populations_series: steps must be >= 1");
  const ComplexVector psi0 = uniform_superposition(g.n);
  ComplexMatrix rho = psi0 * psi0.adjoint();

  PopulationsSeries out;
  out.times.resize(steps + 1);
  out.populations.resize(steps + 1, g.n);
  out.max_offdiagonal.resize(steps + 1);

  auto record = [&](int row) {
    out.times(row) = row * dt;
    out.populations.row(row) = rho.diagonal().real();
    double max_off = 0.0;
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k)
        if (j != k) max_off = std::max(max_off, std::abs(rho(j, k)));
    out.max_offdiagonal(row) = max_off;
  };

  record(0);
  for (int s = 1; s <= steps; ++s) {
    rho = lindblad_step(rho, h_s, m, dt);
    record(s);
  }
  return out;
}

}  // namespace qwfb
