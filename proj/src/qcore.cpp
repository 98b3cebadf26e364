#include "qwfb/qcore.hpp"

#include <cmath>

namespace qwfb {

bool is_hermitian(const ComplexMatrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

bool is_unitary(const ComplexMatrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  ComplexMatrix gram = m.adjoint() * m;
  gram -= ComplexMatrix::Identity(m.rows(), m.cols());
  return gram.cwiseAbs().maxCoeff() <= tolerance;
}

bool is_normalized(const ComplexVector& v, double tolerance) {
  return std::abs(v.norm() - 1.0) <= tolerance;
}

bool is_density_matrix(const ComplexMatrix& m) {
  if (!is_hermitian(m)) return false;
  if (std::abs(m.trace().real() - 1.0) > tol::trace) return false;
  if (std::abs(m.trace().imag()) > tol::trace) return false;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff() >= tol::positivity;
}

ComplexVector uniform_superposition(int n) {
  if (n < 1) throw std::invalid_argument("uniform_superposition: n must be positive");
  return ComplexVector::Constant(n, Complex(1.0 / std::sqrt(double(n)), 0.0));
}

double fidelity_to_target(const ComplexVector& state, int target) {
  if (target < 0 || target >= state.size())
    throw std::out_of_range("fidelity_to_target: target index out of range");
  return std::norm(state(target));
}

double expectation(const ComplexVector& state, const ComplexMatrix& op) {
  if (op.rows() != state.size() || op.cols() != state.size())
    throw std::invalid_argument("expectation: dimension mismatch");
  return (state.adjoint() * (op * state)).value().real();
}

ComplexMatrix hermitian_exp(const ComplexMatrix& op, double scale) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("hermitian_exp: eigendecomposition failed");
  const auto& evals = solver.eigenvalues();
  ComplexVector phases(evals.size());
  for (Eigen::Index k = 0; k < evals.size(); ++k)
    phases(k) = std::exp(Complex(0.0, -scale * evals(k)));
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace qwfb
