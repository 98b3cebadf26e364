#pragma once
// Dense complex linear-algebra primitives shared by the simulator: state
// vectors, Hermitian operators, unitaries, fidelities and the
// eigendecomposition-based matrix exponential.

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace qwfb {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;  // unit-norm amplitude vector over the nodes
using ComplexMatrix = Eigen::MatrixXcd;  // density matrices, Hermitian operators, unitaries
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

// Numerical tolerances, stated once and reused by every module.
namespace tol {
inline constexpr double hermiticity = 1e-12;
inline constexpr double unitarity = 1e-12;
inline constexpr double norm = 1e-10;
inline constexpr double trace = 1e-10;
inline constexpr double positivity = -1e-9;
}  // namespace tol

bool is_hermitian(const ComplexMatrix& m, double tolerance = tol::hermiticity);
bool is_unitary(const ComplexMatrix& m, double tolerance = tol::unitarity);
bool is_normalized(const ComplexVector& v, double tolerance = tol::norm);

// Hermitian within tol::hermiticity, unit trace within tol::trace,
// eigenvalues above tol::positivity.
bool is_density_matrix(const ComplexMatrix& m);

// |psi0> with every amplitude 1/sqrt(n).
ComplexVector uniform_superposition(int n);

// |<target|state>|^2.
double fidelity_to_target(const ComplexVector& state, int target);

// <state|op|state>, imaginary residue discarded.
double expectation(const ComplexVector& state, const ComplexMatrix& op);

// exp(-i * scale * op) for Hermitian op, via eigendecomposition. The result
// is unitary within tol::unitarity by construction.
ComplexMatrix hermitian_exp(const ComplexMatrix& op, double scale);

}  // namespace qwfb
