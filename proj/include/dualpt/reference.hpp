#ifndef DUALPT_REFERENCE_HPP
#define DUALPT_REFERENCE_HPP

#include "dualpt/matrix.hpp"
#include "dualpt/transport.hpp"

// Plain serial implementations of the data-parallel kernels. They share no
// loop machinery with the OpenMP paths; the arithmetic matches term for term,
// so the parity tests and the benchmark can demand bit-equal results.
namespace dualpt::ref {

Matrix cosine_matrix(const Matrix& a, const Matrix& b);

transport::TransportPlan sinkhorn(const Matrix& cost, const ProbVector& p,
                                  const ProbVector& q, const transport::SinkhornConfig& cfg);

transport::TransportPlan solve_assignment(const Matrix& z, const Matrix& w,
                                          const transport::SinkhornConfig& cfg);

}  // namespace dualpt::ref

#endif  // DUALPT_REFERENCE_HPP
