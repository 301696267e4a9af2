#ifndef DUALPT_NUMERICS_HPP
#define DUALPT_NUMERICS_HPP

#include <span>
#include <vector>

#include "dualpt/matrix.hpp"

namespace dualpt::numerics {

// Left-to-right reductions throughout: repeated runs on one machine must be
// bit-identical, so no reassociation, no pairwise tricks.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// Scales v to unit length. Throws DegenerateVector on zero or non-finite norm.
std::vector<double> l2_normalize(std::span<const double> v);

// cos(A_i, B_j) for every row pair, clamped to [-1, 1]. Rows are parallel
// work items. Throws ShapeMismatch on dim mismatch, DegenerateVector if any
// row has zero norm.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);

// softmax(logits / temperature) with max-subtraction. Adding a constant to
// all logits leaves the output bit-identical.
ProbVector softmax(std::span<const double> logits, double temperature);

// log(sum_i exp(x_i)) with max-subtraction; -inf entries are allowed and an
// all -inf input yields -inf.
double logsumexp(std::span<const double> xs);

std::size_t argmax(std::span<const double> xs);  // ties -> lowest index

}  // namespace dualpt::numerics

#endif  // DUALPT_NUMERICS_HPP
