#ifndef DUALPT_TRANSPORT_HPP
#define DUALPT_TRANSPORT_HPP

#include <vector>

#include "dualpt/matrix.hpp"

namespace dualpt::transport {

struct SinkhornConfig {
  double lambda = 0.1;        // entropic regularization
  int inner_max = 100;        // max Sinkhorn sweeps per solve
  int outer_max = 10;         // max rounds of the fused cost loop
  double marginal_tol = 1e-6; // feasibility tolerance (max abs residual)
  double plan_tol = 1e-6;     // outer-loop convergence on max |T_t - T_{t-1}|
  double alpha = 0.2;         // fused weight on the structural (GWD) cost

  void validate() const;  // throws InvalidConfig / InvalidWeight
};

struct TransportPlan {
  Matrix t;                 // N x M, nonnegative
  ProbVector p, q;          // target row / column marginals
  bool converged = true;    // marginal_tol reached before inner_max ran out
  int inner_iterations = 0; // Sinkhorn sweeps, summed over outer rounds
  int outer_iterations = 0; // fused rounds executed (0 for a plain solve)
  double marginal_error = 0.0;      // max abs row/col residual of t
  double outer_delta = 0.0;         // last max |T_t - T_{t-1}|
  bool feasibility_waived = false;  // attention plans keep rows only

  // <T, C> accumulated row-major, fixed order.
  double objective(const Matrix& cost) const;
};

// C_WD = 1 - cos(Z, W); entries land in [0, 2].
Matrix wd_cost(const Matrix& z, const Matrix& w);

// Structural pseudo-cost: (C_z^2 p 1^T + 1 (C_w^2 q)^T) - 2 C_z T C_w^T with
// the squares taken elementwise. The identity plan on matched graphs then
// carries zero total cost, which pins the elementwise reading down.
Matrix gwd_cost(const Matrix& cz, const Matrix& cw, const ProbVector& p,
                const ProbVector& q, const Matrix& t);

// alpha * gwd + (1 - alpha) * wd; the endpoints return the selected matrix
// bit-for-bit.
Matrix fused_cost(const Matrix& wd, const Matrix& gwd, double alpha);

// Log-domain Sinkhorn on a fixed cost. Non-convergence is reported through
// the plan flags, never thrown: training loops keep going on hard instances.
TransportPlan sinkhorn(const Matrix& cost, const ProbVector& p, const ProbVector& q,
                       const SinkhornConfig& cfg);

// Fused assignment between token rows Z and prompt rows W with uniform
// marginals: recompute the structural cost from the current plan, blend with
// the node cost, Sinkhorn, repeat until the plan settles. The plan starts at
// p q^T; potentials warm-start across rounds.
TransportPlan solve_assignment(const Matrix& z, const Matrix& w, const SinkhornConfig& cfg);

// Same loop with the similarity graphs precomputed by the caller (training
// caches cos(Z,Z) per sample and cos(W,W) per class).
TransportPlan solve_assignment_costs(const Matrix& wd, const Matrix& cz, const Matrix& cw,
                                     const ProbVector& p, const ProbVector& q,
                                     const SinkhornConfig& cfg);

struct AssignmentOracle {
  double value = 0.0;                     // min over permutations of (1/n) sum C[i][perm[i]]
  std::vector<std::size_t> permutation;   // lexicographically smallest argmin
};

// Exhaustive oracle for square problems with uniform marginals; n <= 8.
AssignmentOracle exact_ot_bruteforce(const Matrix& cost);

}  // namespace dualpt::transport

#endif  // DUALPT_TRANSPORT_HPP
