#pragma once
// The cycle graph, its Laplacian walk generator, the planar node embedding
// and the static projector-oracle search baseline.

#include <vector>

#include "qwfb/qcore.hpp"

namespace qwfb {

struct CycleGraph {
  int n = 0;  // node count; n >= 3 (a 2-node ring would double its only edge)
};

struct WalkParameters {
  double gamma = 1.0;  // hopping rate; times are reported as gamma*t
};

struct NodePoint {
  double x = 0.0;
  double y = 0.0;
};

// Symmetric 0/1 matrix with A(j,k) = 1 iff k = (j +- 1) mod n.
RealMatrix cycle_adjacency(const CycleGraph& g);

// L = D - A with D the diagonal degree matrix. Rejects non-symmetric input.
RealMatrix laplacian(const RealMatrix& adjacency);

// H = gamma * L, promoted to a complex Hermitian operator.
ComplexMatrix walk_hamiltonian(const CycleGraph& g, const WalkParameters& p);

// Node k at (cos(2 pi k / n), sin(2 pi k / n)); the target node 0 sits
// at (1, 0).
std::vector<NodePoint> node_coordinates(const CycleGraph& g);

// |<target| exp(-i (gamma L - |target><target|) t) |psi0>|^2 with psi0 the
// uniform superposition.
double standard_search_probability(const CycleGraph& g, const WalkParameters& p,
                                   int target, double t);

}  // namespace qwfb
