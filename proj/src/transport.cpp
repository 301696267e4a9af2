#include "dualpt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dualpt/numerics.hpp"
#include "dualpt/parallel.hpp"

namespace dualpt::transport {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> log_weights(const ProbVector& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = v[i] > 0.0 ? std::log(v[i]) : kNegInf;
  return out;
}

struct SweepResult {
  bool converged = false;
  int sweeps = 0;
  double marginal_error = 0.0;
};

// One call = up to inner_max sweeps of the log-domain updates
//   f_i = log p_i - LSE_j(g_j - C_ij/lambda)
//   g_j = log q_j - LSE_i(f_i - C_ij/lambda)
// with the plan assembled as T_ij = exp(f_i + g_j - C_ij/lambda) after every
// sweep for the residual check. Potentials persist across calls so the outer
// fused loop warm-starts. Row and column passes are parallel per line; all
// inner reductions are left-to-right, so results do not depend on thread
// count.
SweepResult log_sinkhorn_sweeps(const Matrix& cost, const ProbVector& p, const ProbVector& q,
                                double lambda, int inner_max, double marginal_tol,
                                std::vector<double>& f, std::vector<double>& g, Matrix& plan) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inv_lambda = 1.0 / lambda;
  const std::vector<double> logp = log_weights(p);
  const std::vector<double> logq = log_weights(q);

  std::vector<double> row_err(n), col_err(m);
  SweepResult res;

  for (int sweep = 1; sweep <= inner_max; ++sweep) {
    parallel::for_each(n, [&](std::size_t i) {
      const double* c = cost.data() + i * m;
      double mx = kNegInf;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = g[j] - c[j] * inv_lambda;
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        f[i] = logp[i] == kNegInf ? kNegInf : logp[i];
        return;
      }
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += std::exp(g[j] - c[j] * inv_lambda - mx);
      f[i] = logp[i] - (mx + std::log(s));
    }, 64);

    parallel::for_each(m, [&](std::size_t j) {
      double mx = kNegInf;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = f[i] - cost(i, j) * inv_lambda;
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        g[j] = logq[j] == kNegInf ? kNegInf : logq[j];
        return;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::exp(f[i] - cost(i, j) * inv_lambda - mx);
      g[j] = logq[j] - (mx + std::log(s));
    }, 64);

    // Assemble the plan and measure feasibility. Column sums run in their
    // own column-parallel pass to keep the accumulation order fixed.
    parallel::for_each(n, [&](std::size_t i) {
      const double* c = cost.data() + i * m;
      double* t = plan.data() + i * m;
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        t[j] = std::exp(f[i] + g[j] - c[j] * inv_lambda);
        sum += t[j];
      }
      row_err[i] = std::fabs(sum - p[i]);
    }, 64);
    parallel::for_each(m, [&](std::size_t j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += plan(i, j);
      col_err[j] = std::fabs(sum - q[j]);
    }, 64);

    double err = 0.0;
    for (double e : row_err) err = std::max(err, e);
    for (double e : col_err) err = std::max(err, e);

    res.sweeps = sweep;
    res.marginal_error = err;
    if (err <= marginal_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void check_cost_and_marginals(const Matrix& cost, const ProbVector& p, const ProbVector& q) {
  if (cost.rows() == 0 || cost.cols() == 0) throw ShapeMismatch("sinkhorn: empty cost matrix");
  if (!cost.all_finite()) throw InvalidCost("sinkhorn: non-finite cost entries");
  if (p.size() != cost.rows() || q.size() != cost.cols())
    throw ShapeMismatch("sinkhorn: marginal lengths do not match the cost matrix");
}

void check_symmetric(const Matrix& c, const char* what) {
  if (c.rows() != c.cols()) throw InvalidGraph(std::string(what) + ": not square");
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j)
      if (std::fabs(c(i, j) - c(j, i)) > 1e-9)
        throw InvalidGraph(std::string(what) + ": not symmetric");
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidConfig("sinkhorn config: lambda must be > 0");
  if (inner_max < 1 || outer_max < 1)
    throw InvalidConfig("sinkhorn config: iteration caps must be >= 1");
  if (!(marginal_tol > 0.0) || !(plan_tol > 0.0))
    throw InvalidConfig("sinkhorn config: tolerances must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidWeight("sinkhorn config: alpha must lie in [0, 1]");
}

double TransportPlan::objective(const Matrix& cost) const {
  if (!t.same_shape(cost)) throw ShapeMismatch("objective: plan/cost shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) s += t(i, j) * cost(i, j);
  return s;
}

Matrix wd_cost(const Matrix& z, const Matrix& w) {
  Matrix c = numerics::cosine_matrix(z, w);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) = 1.0 - c(i, j);
  return c;
}

Matrix gwd_cost(const Matrix& cz, const Matrix& cw, const ProbVector& p,
                const ProbVector& q, const Matrix& t) {
  check_symmetric(cz, "gwd_cost C_z");
  check_symmetric(cw, "gwd_cost C_w");
  const std::size_t n = cz.rows();
  const std::size_t m = cw.rows();
  if (t.rows() != n || t.cols() != m)
    throw ShapeMismatch("gwd_cost: plan shape does not match the graphs");
  if (p.size() != n || q.size() != m)
    throw ShapeMismatch("gwd_cost: marginal lengths do not match the graphs");

  std::vector<double> row_self(n), col_self(m);
  parallel::for_each(n, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += cz(i, k) * cz(i, k) * p[k];
    row_self[i] = s;
  }, 64);
  parallel::for_each(m, [&](std::size_t j) {
    double s = 0.0;
    for (std::size_t l = 0; l < m; ++l) s += cw(j, l) * cw(j, l) * q[l];
    col_self[j] = s;
  }, 64);

  // mid = T C_w^T, then out = self-terms - 2 C_z mid
  Matrix mid(n, m);
  parallel::for_each(n, [&](std::size_t k) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < m; ++l) s += t(k, l) * cw(j, l);
      mid(k, j) = s;
    }
  }, 64);
  Matrix out(n, m);
  parallel::for_each(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += cz(i, k) * mid(k, j);
      out(i, j) = row_self[i] + col_self[j] - 2.0 * s;
    }
  }, 64);
  return out;
}

Matrix fused_cost(const Matrix& wd, const Matrix& gwd, double alpha) {
  if (!wd.same_shape(gwd)) throw ShapeMismatch("fused_cost: shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidWeight("fused_cost: alpha outside [0, 1]");
  if (alpha == 0.0) return wd;
  if (alpha == 1.0) return gwd;
  Matrix out(wd.rows(), wd.cols());
  for (std::size_t i = 0; i < wd.rows(); ++i)
    for (std::size_t j = 0; j < wd.cols(); ++j)
      out(i, j) = alpha * gwd(i, j) + (1.0 - alpha) * wd(i, j);
  return out;
}

TransportPlan sinkhorn(const Matrix& cost, const ProbVector& p, const ProbVector& q,
                       const SinkhornConfig& cfg) {
  cfg.validate();
  check_cost_and_marginals(cost, p, q);

  TransportPlan plan;
  plan.t = Matrix(cost.rows(), cost.cols());
  plan.p = p;
  plan.q = q;
  std::vector<double> f(cost.rows(), 0.0), g(cost.cols(), 0.0);
  const SweepResult res = log_sinkhorn_sweeps(cost, p, q, cfg.lambda, cfg.inner_max,
                                              cfg.marginal_tol, f, g, plan.t);
  plan.converged = res.converged;
  plan.inner_iterations = res.sweeps;
  plan.marginal_error = res.marginal_error;
  return plan;
}

TransportPlan solve_assignment(const Matrix& z, const Matrix& w, const SinkhornConfig& cfg) {
  cfg.validate();
  const Matrix wd = wd_cost(z, w);
  const ProbVector p = ProbVector::uniform(z.rows());
  const ProbVector q = ProbVector::uniform(w.rows());
  if (cfg.alpha == 0.0) {
    TransportPlan plan = sinkhorn(wd, p, q, cfg);
    plan.outer_iterations = 1;
    return plan;
  }
  return solve_assignment_costs(wd, numerics::cosine_matrix(z, z),
                                numerics::cosine_matrix(w, w), p, q, cfg);
}

TransportPlan solve_assignment_costs(const Matrix& wd, const Matrix& cz, const Matrix& cw,
                                     const ProbVector& p, const ProbVector& q,
                                     const SinkhornConfig& cfg) {
  cfg.validate();
  check_cost_and_marginals(wd, p, q);
  if (cz.rows() != wd.rows() || cw.rows() != wd.cols())
    throw ShapeMismatch("solve_assignment_costs: graph sizes do not match the cost");

  if (cfg.alpha == 0.0) {
    // Node-only matching: the fused cost never depends on the plan.
    TransportPlan plan = sinkhorn(wd, p, q, cfg);
    plan.outer_iterations = 1;
    return plan;
  }

  const std::size_t n = wd.rows();
  const std::size_t m = wd.cols();

  TransportPlan plan;
  plan.p = p;
  plan.q = q;
  plan.t = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan.t(i, j) = p[i] * q[j];

  std::vector<double> f(n, 0.0), g(m, 0.0);
  Matrix next(n, m);
  SweepResult last;
  for (int round = 1; round <= cfg.outer_max; ++round) {
    const Matrix structural = gwd_cost(cz, cw, p, q, plan.t);
    const Matrix cost = fused_cost(wd, structural, cfg.alpha);
    last = log_sinkhorn_sweeps(cost, p, q, cfg.lambda, cfg.inner_max, cfg.marginal_tol,
                               f, g, next);
    plan.outer_delta = max_abs_diff(next, plan.t);
    plan.t = next;
    plan.inner_iterations += last.sweeps;
    plan.outer_iterations = round;
    if (plan.outer_delta < cfg.plan_tol) break;
  }
  plan.converged = last.converged;
  plan.marginal_error = last.marginal_error;
  return plan;
}

AssignmentOracle exact_ot_bruteforce(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (n != cost.cols()) throw ShapeMismatch("exact_ot_bruteforce: cost must be square");
  if (n == 0) throw ShapeMismatch("exact_ot_bruteforce: empty cost");
  if (n > 8) throw TooLarge("exact_ot_bruteforce: n > 8");
  if (!cost.all_finite()) throw InvalidCost("exact_ot_bruteforce: non-finite cost");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  AssignmentOracle best;
  double best_sum = std::numeric_limits<double>::infinity();
  // Lexicographic enumeration + strict improvement keeps the smallest argmin.
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost(i, perm[i]);
    if (s < best_sum) {
      best_sum = s;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.value = best_sum / static_cast<double>(n);
  return best;
}

}  // namespace dualpt::transport
