// Times the serial reference kernels against the OpenMP paths on
// training-shaped workloads and checks that their outputs agree bit-for-bit.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dualpt/numerics.hpp"
#include "dualpt/parallel.hpp"
#include "dualpt/reference.hpp"
#include "dualpt/rng.hpp"
#include "dualpt/transport.hpp"

using dualpt::Matrix;
using dualpt::ProbVector;

namespace {

Matrix random_embeddings(std::size_t rows, std::size_t dim, dualpt::rng::Generator& g) {
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = dualpt::numerics::l2_normalize(dualpt::rng::normal_vector(dim, g));
    for (std::size_t t = 0; t < dim; ++t) m(i, t) = row[t];
  }
  return m;
}

double time_ms(const std::function<void()>& fn, int repeat) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeat; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeat;
}

void report(const char* name, const char* size, double serial_ms, double parallel_ms,
            double max_diff) {
  std::printf("%-22s %-18s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx   max|diff| %.3g\n",
              name, size, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int threads = 0;
  int repeat = 3;
  app.add_option("--threads", threads, "worker threads (0 = hardware default)");
  app.add_option("--repeat", repeat, "repetitions per measurement");
  CLI11_PARSE(app, argc, argv);

  const int hw = dualpt::parallel::max_threads();
  const int par_threads = threads > 0 ? threads : hw;
  std::printf("openmp=%s threads=%d repeat=%d\n\n",
              dualpt::parallel::openmp_compiled() ? "yes" : "no", par_threads, repeat);

  dualpt::rng::Generator g(2024);

  // cosine_matrix on a large block
  {
    const Matrix a = random_embeddings(768, 64, g);
    const Matrix b = random_embeddings(768, 64, g);
    Matrix serial_out, parallel_out;
    dualpt::parallel::set_max_threads(1);
    const double t_serial = time_ms([&] { serial_out = dualpt::ref::cosine_matrix(a, b); }, repeat);
    dualpt::parallel::set_max_threads(par_threads);
    const double t_par = time_ms([&] { parallel_out = dualpt::numerics::cosine_matrix(a, b); },
                                 repeat);
    report("cosine_matrix", "768x768 d=64", t_serial, t_par,
           dualpt::max_abs_diff(serial_out, parallel_out));
  }

  // one large Sinkhorn solve
  {
    Matrix cost(384, 384);
    for (std::size_t i = 0; i < cost.rows(); ++i)
      for (std::size_t j = 0; j < cost.cols(); ++j) cost(i, j) = 2.0 * g.uniform();
    const ProbVector p = ProbVector::uniform(cost.rows());
    const ProbVector q = ProbVector::uniform(cost.cols());
    dualpt::transport::SinkhornConfig cfg;
    cfg.lambda = 0.05;
    cfg.inner_max = 120;
    cfg.marginal_tol = 1e-12;  // fixed sweep budget, both paths run it all
    dualpt::transport::TransportPlan serial_plan, parallel_plan;
    dualpt::parallel::set_max_threads(1);
    const double t_serial = time_ms([&] { serial_plan = dualpt::ref::sinkhorn(cost, p, q, cfg); },
                                    repeat);
    dualpt::parallel::set_max_threads(par_threads);
    const double t_par =
        time_ms([&] { parallel_plan = dualpt::transport::sinkhorn(cost, p, q, cfg); }, repeat);
    report("sinkhorn", "384x384", t_serial, t_par,
           dualpt::max_abs_diff(serial_plan.t, parallel_plan.t));
  }

  // the training fan-out: many small fused solves (tokens x prompts)
  {
    const int solves = 600;
    std::vector<Matrix> zs, ws;
    for (int s = 0; s < solves; ++s) {
      zs.push_back(random_embeddings(49, 32, g));
      ws.push_back(random_embeddings(4, 32, g));
    }
    dualpt::transport::SinkhornConfig cfg;  // training defaults
    std::vector<Matrix> serial_plans(solves), parallel_plans(solves);
    dualpt::parallel::set_max_threads(1);
    const double t_serial = time_ms(
        [&] {
          for (int s = 0; s < solves; ++s)
            serial_plans[s] = dualpt::ref::solve_assignment(zs[s], ws[s], cfg).t;
        },
        repeat);
    dualpt::parallel::set_max_threads(par_threads);
    const double t_par = time_ms(
        [&] {
          dualpt::parallel::for_each(static_cast<std::size_t>(solves), [&](std::size_t s) {
            parallel_plans[s] = dualpt::transport::solve_assignment(zs[s], ws[s], cfg).t;
          });
        },
        repeat);
    double max_diff = 0.0;
    for (int s = 0; s < solves; ++s)
      max_diff = std::max(max_diff, dualpt::max_abs_diff(serial_plans[s], parallel_plans[s]));
    report("solve_assignment x600", "49x4 d=32", t_serial, t_par, max_diff);
  }

  return 0;
}
