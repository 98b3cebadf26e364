#include "qwfb/graph.hpp"

#include <cmath>
#include <numbers>

namespace qwfb {

namespace {
void require_valid(const CycleGraph& g) {
  if (g.n < 3) throw std::invalid_argument("CycleGraph: n must be at least 3");
}
void require_valid(const WalkParameters& p) {
  if (!(p.gamma > 0.0)) throw std::invalid_argument("WalkParameters: gamma must be positive");
}
}  // namespace

RealMatrix cycle_adjacency(const CycleGraph& g) {
  require_valid(g);
  RealMatrix a = RealMatrix::Zero(g.n, g.n);
  for (int j = 0; j < g.n; ++j) {
    a(j, (j + 1) % g.n) = 1.0;
    a((j + 1) % g.n, j) = 1.0;
  }
  return a;
}

RealMatrix laplacian(const RealMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols() ||
      (adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("laplacian: adjacency must be symmetric");
  RealMatrix l = -adjacency;
  l.diagonal() += adjacency.rowwise().sum();
  return l;
}

ComplexMatrix walk_hamiltonian(const CycleGraph& g, const WalkParameters& p) {
  require_valid(g);
  require_valid(p);
  return (p.gamma * laplacian(cycle_adjacency(g))).cast<Complex>();
}

std::vector<NodePoint> node_coordinates(const CycleGraph& g) {
  require_valid(g);
  std::vector<NodePoint> pts(g.n);
  for (int k = 0; k < g.n; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / g.n;
    pts[k] = {std::cos(angle), std::sin(angle)};
  }
  return pts;
}

double standard_search_probability(const CycleGraph& g, const WalkParameters& p,
                                   int target, double t) {
  require_valid(g);
  require_valid(p);
  if (target < 0 || target >= g.n)
    throw std::out_of_range("standard_search_probability: invalid target index");
  if (t < 0.0) throw std::invalid_argument("standard_search_probability: t must be >= 0");
  ComplexMatrix h_search = walk_hamiltonian(g, p);
  h_search(target, target) -= 1.0;
  const ComplexVector evolved = hermitian_exp(h_search, t) * uniform_superposition(g.n);
  return std::norm(evolved(target));
}

}  // namespace qwfb
