#include "dualpt/reference.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace dualpt::ref {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

std::vector<double> row_inverse_norms(const Matrix& m, const char* what) {
  std::vector<double> inv(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double x : m.row(i)) s += x * x;
    const double n = std::sqrt(s);
    if (!(n > 0.0) || !std::isfinite(n))
      throw DegenerateVector(std::string(what) + ": zero-norm row");
    inv[i] = 1.0 / n;
  }
  return inv;
}

struct SweepResult {
  bool converged = false;
  int sweeps = 0;
  double marginal_error = 0.0;
};

SweepResult sinkhorn_sweeps(const Matrix& cost, const ProbVector& p, const ProbVector& q,
                            double lambda, int inner_max, double marginal_tol,
                            std::vector<double>& f, std::vector<double>& g, Matrix& plan) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inv_lambda = 1.0 / lambda;
  std::vector<double> logp(n), logq(m);
  for (std::size_t i = 0; i < n; ++i) logp[i] = p[i] > 0.0 ? std::log(p[i]) : kNegInf;
  for (std::size_t j = 0; j < m; ++j) logq[j] = q[j] > 0.0 ? std::log(q[j]) : kNegInf;

  SweepResult res;
  for (int sweep = 1; sweep <= inner_max; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = cost.data() + i * m;
      double mx = kNegInf;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = g[j] - c[j] * inv_lambda;
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        f[i] = logp[i] == kNegInf ? kNegInf : logp[i];
        continue;
      }
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += std::exp(g[j] - c[j] * inv_lambda - mx);
      f[i] = logp[i] - (mx + std::log(s));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double mx = kNegInf;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = f[i] - cost(i, j) * inv_lambda;
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        g[j] = logq[j] == kNegInf ? kNegInf : logq[j];
        continue;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::exp(f[i] - cost(i, j) * inv_lambda - mx);
      g[j] = logq[j] - (mx + std::log(s));
    }

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = cost.data() + i * m;
      double* t = plan.data() + i * m;
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        t[j] = std::exp(f[i] + g[j] - c[j] * inv_lambda);
        sum += t[j];
      }
      const double e = std::fabs(sum - p[i]);
      if (e > err) err = e;
    }
    for (std::size_t j = 0; j < m; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += plan(i, j);
      const double e = std::fabs(sum - q[j]);
      if (e > err) err = e;
    }

    res.sweeps = sweep;
    res.marginal_error = err;
    if (err <= marginal_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Matrix structural_cost(const Matrix& cz, const Matrix& cw, const ProbVector& p,
                       const ProbVector& q, const Matrix& t) {
  const std::size_t n = cz.rows();
  const std::size_t m = cw.rows();
  std::vector<double> row_self(n), col_self(m);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += cz(i, k) * cz(i, k) * p[k];
    row_self[i] = s;
  }
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < m; ++l) s += cw(j, l) * cw(j, l) * q[l];
    col_self[j] = s;
  }
  Matrix mid(n, m);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < m; ++l) s += t(k, l) * cw(j, l);
      mid(k, j) = s;
    }
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += cz(i, k) * mid(k, j);
      out(i, j) = row_self[i] + col_self[j] - 2.0 * s;
    }
  return out;
}

}  // namespace

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("ref::cosine_matrix: dim mismatch");
  if (a.rows() == 0 || b.rows() == 0) throw ShapeMismatch("ref::cosine_matrix: empty input");
  if (!a.all_finite() || !b.all_finite())
    throw NonFiniteValue("ref::cosine_matrix: non-finite input");
  const std::vector<double> inv_a = row_inverse_norms(a, "ref::cosine_matrix lhs");
  const std::vector<double> inv_b = row_inverse_norms(b, "ref::cosine_matrix rhs");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ra = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto rb = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ra.size(); ++k) s += ra[k] * rb[k];
      out(i, j) = clamp_unit(s * (inv_a[i] * inv_b[j]));
    }
  }
  return out;
}

transport::TransportPlan sinkhorn(const Matrix& cost, const ProbVector& p,
                                  const ProbVector& q, const transport::SinkhornConfig& cfg) {
  cfg.validate();
  if (!cost.all_finite()) throw InvalidCost("ref::sinkhorn: non-finite cost entries");
  if (p.size() != cost.rows() || q.size() != cost.cols())
    throw ShapeMismatch("ref::sinkhorn: marginal lengths do not match");
  transport::TransportPlan plan;
  plan.t = Matrix(cost.rows(), cost.cols());
  plan.p = p;
  plan.q = q;
  std::vector<double> f(cost.rows(), 0.0), g(cost.cols(), 0.0);
  const SweepResult res = sinkhorn_sweeps(cost, p, q, cfg.lambda, cfg.inner_max,
                                          cfg.marginal_tol, f, g, plan.t);
  plan.converged = res.converged;
  plan.inner_iterations = res.sweeps;
  plan.marginal_error = res.marginal_error;
  return plan;
}

transport::TransportPlan solve_assignment(const Matrix& z, const Matrix& w,
                                          const transport::SinkhornConfig& cfg) {
  cfg.validate();
  Matrix wd = cosine_matrix(z, w);
  for (std::size_t i = 0; i < wd.rows(); ++i)
    for (std::size_t j = 0; j < wd.cols(); ++j) wd(i, j) = 1.0 - wd(i, j);
  const ProbVector p = ProbVector::uniform(z.rows());
  const ProbVector q = ProbVector::uniform(w.rows());

  if (cfg.alpha == 0.0) {
    transport::TransportPlan plan = ref::sinkhorn(wd, p, q, cfg);
    plan.outer_iterations = 1;
    return plan;
  }

  const Matrix cz = cosine_matrix(z, z);
  const Matrix cw = cosine_matrix(w, w);
  const std::size_t n = wd.rows();
  const std::size_t m = wd.cols();

  transport::TransportPlan plan;
  plan.p = p;
  plan.q = q;
  plan.t = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan.t(i, j) = p[i] * q[j];

  std::vector<double> f(n, 0.0), g(m, 0.0);
  Matrix next(n, m);
  SweepResult last;
  for (int round = 1; round <= cfg.outer_max; ++round) {
    const Matrix structural = structural_cost(cz, cw, p, q, plan.t);
    Matrix cost(n, m);
    if (cfg.alpha == 1.0) {
      cost = structural;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          cost(i, j) = cfg.alpha * structural(i, j) + (1.0 - cfg.alpha) * wd(i, j);
    }
    last = sinkhorn_sweeps(cost, p, q, cfg.lambda, cfg.inner_max, cfg.marginal_tol, f, g, next);
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

}  // namespace dualpt::ref
