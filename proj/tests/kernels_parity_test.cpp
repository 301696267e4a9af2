// The serial reference and the OpenMP kernels must agree bit-for-bit, at any
// thread count. Each iteration of a parallel loop owns its output slot and
// every reduction is fixed-order, so this is an equality check, not a
// tolerance check.

#include "doctest.h"

#include "dualpt/numerics.hpp"
#include "dualpt/parallel.hpp"
#include "dualpt/reference.hpp"
#include "dualpt/rng.hpp"
#include "dualpt/transport.hpp"

using namespace dualpt;

namespace {

struct ThreadGuard {
  int saved = parallel::max_threads();
  ~ThreadGuard() { parallel::set_max_threads(saved); }
};

Matrix random_unit_rows(std::size_t rows, std::size_t dim, rng::Generator& g) {
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = numerics::l2_normalize(rng::normal_vector(dim, g));
    for (std::size_t t = 0; t < dim; ++t) m(i, t) = row[t];
  }
  return m;
}

}  // namespace

TEST_CASE("cosine_matrix parity across thread counts") {
  ThreadGuard guard;
  rng::Generator g(101);
  const Matrix a = random_unit_rows(23, 17, g);
  const Matrix b = random_unit_rows(9, 17, g);
  const Matrix expected = ref::cosine_matrix(a, b);
  for (int threads : {1, 2, 4}) {
    parallel::set_max_threads(threads);
    CHECK(numerics::cosine_matrix(a, b) == expected);
  }
}

TEST_CASE("sinkhorn parity across thread counts") {
  ThreadGuard guard;
  rng::Generator g(102);
  Matrix cost(11, 7);
  for (std::size_t i = 0; i < cost.rows(); ++i)
    for (std::size_t j = 0; j < cost.cols(); ++j) cost(i, j) = 2.0 * g.uniform();
  const ProbVector p = ProbVector::uniform(11);
  const ProbVector q = ProbVector::uniform(7);
  transport::SinkhornConfig cfg;
  cfg.lambda = 0.05;
  cfg.inner_max = 500;
  const auto expected = ref::sinkhorn(cost, p, q, cfg);
  for (int threads : {1, 2, 4}) {
    parallel::set_max_threads(threads);
    const auto got = transport::sinkhorn(cost, p, q, cfg);
    CHECK(got.t == expected.t);
    CHECK(got.inner_iterations == expected.inner_iterations);
    CHECK(got.converged == expected.converged);
    CHECK(got.marginal_error == expected.marginal_error);
  }
}

TEST_CASE("solve_assignment parity across thread counts and alphas") {
  ThreadGuard guard;
  rng::Generator g(103);
  const Matrix z = random_unit_rows(12, 16, g);
  const Matrix w = random_unit_rows(4, 16, g);
  for (double alpha : {0.0, 0.2, 1.0}) {
    transport::SinkhornConfig cfg;
    cfg.alpha = alpha;
    const auto expected = ref::solve_assignment(z, w, cfg);
    for (int threads : {1, 4}) {
      parallel::set_max_threads(threads);
      const auto got = transport::solve_assignment(z, w, cfg);
      CHECK(got.t == expected.t);
      CHECK(got.outer_iterations == expected.outer_iterations);
      CHECK(got.inner_iterations == expected.inner_iterations);
    }
  }
}
