#include "dualpt/numerics.hpp"

#include <cmath>
#include <limits>

#include "dualpt/parallel.hpp"

namespace dualpt::numerics {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n))
    throw DegenerateVector("l2_normalize: zero or non-finite norm");
  std::vector<double> out(v.size());
  const double inv = 1.0 / n;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

namespace {

double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

std::vector<double> row_inverse_norms(const Matrix& m, const char* what) {
  std::vector<double> inv(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm(m.row(i));
    if (!(n > 0.0) || !std::isfinite(n))
      throw DegenerateVector(std::string(what) + ": zero-norm row");
    inv[i] = 1.0 / n;
  }
  return inv;
}

}  // namespace

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("cosine_matrix: dim mismatch");
  if (a.rows() == 0 || b.rows() == 0) throw ShapeMismatch("cosine_matrix: empty input");
  if (!a.all_finite() || !b.all_finite())
    throw NonFiniteValue("cosine_matrix: non-finite input");
  const std::vector<double> inv_a = row_inverse_norms(a, "cosine_matrix lhs");
  const std::vector<double> inv_b = row_inverse_norms(b, "cosine_matrix rhs");

  Matrix out(a.rows(), b.rows());
  parallel::for_each(a.rows(), [&](std::size_t i) {
    const auto ra = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto rb = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ra.size(); ++k) s += ra[k] * rb[k];
      out(i, j) = clamp_unit(s * (inv_a[i] * inv_b[j]));
    }
  }, 16);
  return out;
}

ProbVector softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw InvalidTemperature("softmax: temperature must be > 0");
  if (logits.empty()) throw ShapeMismatch("softmax: empty logits");
  double mx = logits[0];
  for (double x : logits) {
    if (!std::isfinite(x)) throw NonFiniteValue("softmax: non-finite logit");
    if (x > mx) mx = x;
  }
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp((logits[i] - mx) / temperature);
    sum += e[i];
  }
  const double inv = 1.0 / sum;
  for (double& x : e) x *= inv;
  return ProbVector(std::move(e));
}

double logsumexp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs)
    if (x > mx) mx = x;
  if (!std::isfinite(mx)) return mx;  // all -inf (or an inf propagates)
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::size_t argmax(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

}  // namespace dualpt::numerics
