#include "dualpt/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "dualpt/numerics.hpp"
#include "dualpt/parallel.hpp"

namespace dualpt::alignment {

namespace {

double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

// Composed prompts for one class plus everything the solver and the gradient
// reuse: 1/||S_m + anchor_k|| feeds the normalization Jacobian, cos(W, W)
// feeds the structural cost.
struct PromptGraph {
  Matrix w;                       // M x d, unit rows
  std::vector<double> inv_unorm;  // 1 / ||S_m + anchor_k||
  Matrix cw;                      // cos(W, W)
};

PromptGraph make_prompt_graph(const ContextBank& bank, std::size_t k, bool with_cw) {
  const std::size_t m = bank.prompt_count();
  const std::size_t d = bank.dim();
  PromptGraph pg;
  pg.w = Matrix(m, d);
  pg.inv_unorm.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    double sq = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double u = bank.s(r, t) + bank.anchors(k, t);
      pg.w(r, t) = u;
      sq += u * u;
    }
    const double n = std::sqrt(sq);
    if (!(n > 0.0) || !std::isfinite(n))
      throw DegenerateVector("class_prompts: context cancels the anchor to a zero vector");
    pg.inv_unorm[r] = 1.0 / n;
    for (std::size_t t = 0; t < d; ++t) pg.w(r, t) *= pg.inv_unorm[r];
  }
  if (with_cw) pg.cw = numerics::cosine_matrix(pg.w, pg.w);
  return pg;
}

transport::SinkhornConfig mode_config(const AlignmentConfig& cfg) {
  transport::SinkhornConfig sk = cfg.sinkhorn;
  if (cfg.align == AlignmentMode::Node) sk.alpha = 0.0;
  if (cfg.align == AlignmentMode::Edge) sk.alpha = 1.0;
  return sk;
}

bool needs_token_graph(const AlignmentConfig& cfg) {
  if (cfg.align == AlignmentMode::Attention) return false;
  return mode_config(cfg).alpha > 0.0;
}

Matrix attention_rows(const Matrix& sims, double attention_tau) {
  const std::size_t n = sims.rows();
  Matrix t(n, sims.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ProbVector row = numerics::softmax(sims.row(i), attention_tau);
    for (std::size_t j = 0; j < sims.cols(); ++j) t(i, j) = row[j] * inv_n;
  }
  return t;
}

Matrix solve_instance_plan(const Matrix& sims, const Matrix* cz, const PromptGraph& pg,
                           const AlignmentConfig& cfg) {
  if (cfg.align == AlignmentMode::Attention) return attention_rows(sims, cfg.attention_tau);
  Matrix wd(sims.rows(), sims.cols());
  for (std::size_t i = 0; i < sims.rows(); ++i)
    for (std::size_t j = 0; j < sims.cols(); ++j) wd(i, j) = 1.0 - sims(i, j);
  const ProbVector p = ProbVector::uniform(sims.rows());
  const ProbVector q = ProbVector::uniform(sims.cols());
  const transport::SinkhornConfig sk = mode_config(cfg);
  if (sk.alpha == 0.0) {
    transport::TransportPlan plan = transport::sinkhorn(wd, p, q, sk);
    return plan.t;
  }
  return transport::solve_assignment_costs(wd, *cz, pg.cw, p, q, sk).t;
}

// Mean pairwise cosine distance between one prompt set and one descriptor
// block. Terms are sorted before summation so the value is exactly invariant
// under permuting either side's rows.
double class_cosine_loss(const Matrix& w, const Matrix& block) {
  std::vector<double> terms;
  terms.reserve(w.rows() * block.rows());
  for (std::size_t m = 0; m < w.rows(); ++m)
    for (std::size_t e = 0; e < block.rows(); ++e)
      terms.push_back(1.0 - clamp_unit(numerics::dot(w.row(m), block.row(e))));
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s / static_cast<double>(terms.size());
}

std::vector<double> descriptor_centroid(const Matrix& block) {
  std::vector<double> c(block.cols(), 0.0);
  for (std::size_t e = 0; e < block.rows(); ++e)
    for (std::size_t t = 0; t < block.cols(); ++t) c[t] += block(e, t);
  const double inv = 1.0 / static_cast<double>(block.rows());
  for (double& x : c) x *= inv;
  return c;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = numerics::norm(a);
  const double nb = numerics::norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateVector("cosine: zero-norm vector");
  return clamp_unit(numerics::dot(a, b) / (na * nb));
}

void check_batch(std::span<const BatchInstance> batch, std::size_t class_count) {
  if (batch.empty()) throw InvalidConfig("batch must be nonempty");
  for (const BatchInstance& x : batch) {
    if (x.tokens == nullptr) throw InvalidConfig("batch instance without tokens");
    if (x.label < 0 || static_cast<std::size_t>(x.label) >= class_count)
      throw InvalidLabel("label outside [0, K)");
  }
}

struct SampleWork {
  Matrix grad;        // d(total image CE)/dS for this sample, unscaled
  Matrix ce_grad;     // CE-distill gradient for this sample, unscaled
  double img_loss = 0.0;
  double ce_loss = 0.0;
};

}  // namespace

const char* to_string(AlignmentMode mode) {
  switch (mode) {
    case AlignmentMode::Graph: return "graph";
    case AlignmentMode::Node: return "node";
    case AlignmentMode::Edge: return "edge";
    case AlignmentMode::Attention: return "attn";
  }
  return "graph";
}

const char* to_string(DistillMode mode) {
  switch (mode) {
    case DistillMode::Cosine: return "cosine";
    case DistillMode::WD: return "wd";
    case DistillMode::CE: return "ce";
    case DistillMode::None: return "none";
  }
  return "cosine";
}

AlignmentMode alignment_mode_from(const std::string& name) {
  if (name == "graph") return AlignmentMode::Graph;
  if (name == "node") return AlignmentMode::Node;
  if (name == "edge") return AlignmentMode::Edge;
  if (name == "attn" || name == "attention") return AlignmentMode::Attention;
  throw InvalidConfig("unknown alignment mode: " + name);
}

DistillMode distill_mode_from(const std::string& name) {
  if (name == "cosine") return DistillMode::Cosine;
  if (name == "wd") return DistillMode::WD;
  if (name == "ce") return DistillMode::CE;
  if (name == "none") return DistillMode::None;
  throw InvalidConfig("unknown distill mode: " + name);
}

void ContextBank::validate() const {
  if (s.rows() < 1 || anchors.rows() < 1) throw InvalidConfig("context bank must be nonempty");
  if (s.cols() != anchors.cols()) throw ShapeMismatch("context/anchor dims differ");
  if (!s.all_finite() || !anchors.all_finite())
    throw NonFiniteValue("context bank has non-finite entries");
}

void ClassDescriptors::validate(std::size_t dim, std::size_t class_count) const {
  if (blocks.size() != class_count)
    throw MissingDescriptors("descriptor blocks do not cover every class");
  for (const Matrix& b : blocks) {
    if (b.rows() < 1) throw MissingDescriptors("a class has an empty descriptor set");
    if (b.cols() != dim) throw ShapeMismatch("descriptor dim does not match the bank");
    for (std::size_t e = 0; e < b.rows(); ++e)
      if (std::fabs(numerics::norm(b.row(e)) - 1.0) > 1e-9)
        throw InvalidConfig("descriptor rows must be unit-norm");
  }
}

Matrix token_graph(const Matrix& tokens) { return numerics::cosine_matrix(tokens, tokens); }

Matrix class_prompts(const ContextBank& bank, std::size_t k) {
  bank.validate();
  if (k >= bank.class_count()) throw InvalidClass("class index out of range");
  return make_prompt_graph(bank, k, false).w;
}

double distill_loss_cosine(const ContextBank& bank, const ClassDescriptors& desc) {
  bank.validate();
  desc.validate(bank.dim(), bank.class_count());
  const std::size_t kk = bank.class_count();
  double loss = 0.0;
  for (std::size_t k = 0; k < kk; ++k)
    loss += class_cosine_loss(make_prompt_graph(bank, k, false).w, desc.blocks[k]);
  return loss / static_cast<double>(kk);
}

double distill_loss_wd(const ContextBank& bank, const ClassDescriptors& desc,
                       const transport::SinkhornConfig& cfg) {
  bank.validate();
  desc.validate(bank.dim(), bank.class_count());
  const std::size_t kk = bank.class_count();
  std::vector<double> per_class(kk);
  parallel::for_each(kk, [&](std::size_t k) {
    const PromptGraph pg = make_prompt_graph(bank, k, false);
    const Matrix cost = transport::wd_cost(pg.w, desc.blocks[k]);
    const transport::TransportPlan plan = transport::sinkhorn(
        cost, ProbVector::uniform(cost.rows()), ProbVector::uniform(cost.cols()), cfg);
    per_class[k] = plan.objective(cost);
  });
  double loss = 0.0;
  for (double v : per_class) loss += v;
  return loss / static_cast<double>(kk);
}

double distill_loss_ce(std::span<const BatchInstance> batch, const ContextBank& bank,
                       const ClassDescriptors& desc, double tau) {
  if (!(tau > 0.0)) throw InvalidTemperature("distill_loss_ce: tau must be > 0");
  bank.validate();
  desc.validate(bank.dim(), bank.class_count());
  if (batch.empty()) throw InvalidConfig("distill_loss_ce: empty batch");
  const std::size_t kk = bank.class_count();
  std::vector<std::vector<double>> centroids(kk);
  for (std::size_t k = 0; k < kk; ++k) centroids[k] = descriptor_centroid(desc.blocks[k]);

  double loss = 0.0;
  for (const BatchInstance& x : batch) {
    std::vector<double> teacher_logits(kk), student_logits(kk);
    for (std::size_t k = 0; k < kk; ++k)
      teacher_logits[k] = cosine(x.global, centroids[k]);
    const ProbVector teacher = numerics::softmax(teacher_logits, tau);
    const ProbVector student = global_predict(x.global, bank, tau, true);
    double ce = 0.0;
    for (std::size_t k = 0; k < kk; ++k) ce -= teacher[k] * std::log(student[k]);
    loss += ce;
  }
  return loss / static_cast<double>(batch.size());
}

transport::TransportPlan attention_plan(const Matrix& z, const Matrix& w, double attention_tau) {
  if (!(attention_tau > 0.0)) throw InvalidTemperature("attention_plan: tau must be > 0");
  const Matrix sims = numerics::cosine_matrix(z, w);
  transport::TransportPlan plan;
  plan.t = attention_rows(sims, attention_tau);
  plan.p = ProbVector::uniform(z.rows());
  plan.q = ProbVector::uniform(w.rows());
  plan.feasibility_waived = true;
  plan.converged = true;
  return plan;
}

ProbVector ot_predict(const Matrix& tokens, const ContextBank& bank,
                      const transport::SinkhornConfig& cfg, AlignmentMode mode, double tau,
                      double attention_tau) {
  if (!(tau > 0.0)) throw InvalidTemperature("ot_predict: tau must be > 0");
  bank.validate();
  AlignmentConfig acfg;
  acfg.sinkhorn = cfg;
  acfg.align = mode;
  acfg.tau = tau;
  acfg.attention_tau = attention_tau;

  const std::size_t kk = bank.class_count();
  Matrix cz;
  if (needs_token_graph(acfg)) cz = token_graph(tokens);
  std::vector<double> logits(kk);
  parallel::for_each(kk, [&](std::size_t k) {
    const PromptGraph pg = make_prompt_graph(bank, k, needs_token_graph(acfg));
    const Matrix sims = numerics::cosine_matrix(tokens, pg.w);
    const Matrix plan = solve_instance_plan(sims, &cz, pg, acfg);
    double s = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i)
      for (std::size_t j = 0; j < plan.cols(); ++j) s += plan(i, j) * sims(i, j);
    logits[k] = s / tau;
  });
  return numerics::softmax(logits, 1.0);
}

ProbVector global_predict(std::span<const double> z_global, const ContextBank& bank,
                          double tau, bool use_context) {
  if (!(tau > 0.0)) throw InvalidTemperature("global_predict: tau must be > 0");
  bank.validate();
  const std::size_t kk = bank.class_count();
  std::vector<double> sims(kk);
  for (std::size_t k = 0; k < kk; ++k) {
    if (use_context) {
      const PromptGraph pg = make_prompt_graph(bank, k, false);
      std::vector<double> mean(bank.dim(), 0.0);
      for (std::size_t m = 0; m < pg.w.rows(); ++m)
        for (std::size_t t = 0; t < bank.dim(); ++t) mean[t] += pg.w(m, t);
      const double inv = 1.0 / static_cast<double>(pg.w.rows());
      for (double& v : mean) v *= inv;
      sims[k] = cosine(z_global, mean);
    } else {
      sims[k] = cosine(z_global, bank.anchors.row(k));
    }
  }
  return numerics::softmax(sims, tau);
}

double image_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                  const transport::SinkhornConfig& cfg, AlignmentMode mode, double tau,
                  double attention_tau) {
  bank.validate();
  check_batch(batch, bank.class_count());
  double loss = 0.0;
  for (const BatchInstance& x : batch) {
    const ProbVector probs = ot_predict(*x.tokens, bank, cfg, mode, tau, attention_tau);
    loss -= std::log(probs[static_cast<std::size_t>(x.label)]);
  }
  return loss / static_cast<double>(batch.size());
}

PlanSet solve_plan_set(std::span<const BatchInstance> batch, const ContextBank& bank,
                       const ClassDescriptors& desc, const AlignmentConfig& cfg) {
  bank.validate();
  check_batch(batch, bank.class_count());
  if (cfg.distill != DistillMode::None) desc.validate(bank.dim(), bank.class_count());
  if (!(cfg.tau > 0.0)) throw InvalidTemperature("solve_plan_set: tau must be > 0");

  const std::size_t kk = bank.class_count();
  const bool want_cz = needs_token_graph(cfg);
  std::vector<PromptGraph> prompts(kk);
  parallel::for_each(kk, [&](std::size_t k) { prompts[k] = make_prompt_graph(bank, k, want_cz); });

  PlanSet plans;
  plans.image_plans.resize(batch.size());
  parallel::for_each(batch.size(), [&](std::size_t x) {
    const Matrix& tokens = *batch[x].tokens;
    Matrix local_cz;
    const Matrix* cz = batch[x].cz;
    if (want_cz && cz == nullptr) {
      local_cz = token_graph(tokens);
      cz = &local_cz;
    }
    plans.image_plans[x].resize(kk);
    for (std::size_t k = 0; k < kk; ++k) {
      const Matrix sims = numerics::cosine_matrix(tokens, prompts[k].w);
      plans.image_plans[x][k] = solve_instance_plan(sims, cz, prompts[k], cfg);
    }
  });

  if (cfg.distill == DistillMode::WD) {
    plans.distill_plans.resize(kk);
    parallel::for_each(kk, [&](std::size_t k) {
      const Matrix cost = transport::wd_cost(prompts[k].w, desc.blocks[k]);
      plans.distill_plans[k] =
          transport::sinkhorn(cost, ProbVector::uniform(cost.rows()),
                              ProbVector::uniform(cost.cols()), cfg.sinkhorn)
              .t;
    });
  }
  return plans;
}

namespace {

// Shared forward/backward over a frozen plan set. grad_out == nullptr means
// value only. All per-sample work runs in parallel into slots; the reduction
// happens serially in sample order.
LossBreakdown evaluate_frozen(std::span<const BatchInstance> batch, const ContextBank& bank,
                              const ClassDescriptors& desc, const AlignmentConfig& cfg,
                              const PlanSet& plans, Matrix* grad_out) {
  bank.validate();
  check_batch(batch, bank.class_count());
  if (cfg.distill != DistillMode::None) desc.validate(bank.dim(), bank.class_count());
  if (!(cfg.tau > 0.0)) throw InvalidTemperature("tau must be > 0");
  if (plans.image_plans.size() != batch.size())
    throw ShapeMismatch("plan set does not match the batch");

  const std::size_t kk = bank.class_count();
  const std::size_t mm = bank.prompt_count();
  const std::size_t d = bank.dim();
  const bool with_grad = grad_out != nullptr;
  const double inv_tau = 1.0 / cfg.tau;

  std::vector<PromptGraph> prompts(kk);
  parallel::for_each(kk, [&](std::size_t k) { prompts[k] = make_prompt_graph(bank, k, false); });

  std::vector<std::vector<double>> centroids;
  if (cfg.distill == DistillMode::CE) {
    centroids.resize(kk);
    for (std::size_t k = 0; k < kk; ++k) centroids[k] = descriptor_centroid(desc.blocks[k]);
  }

  // ---- per-sample work: image CE (+ CE distillation when selected)
  std::vector<SampleWork> work(batch.size());
  parallel::for_each(batch.size(), [&](std::size_t x) {
    SampleWork& sw = work[x];
    const Matrix& tokens = *batch[x].tokens;
    const std::size_t n = tokens.rows();
    if (with_grad) sw.grad = Matrix(mm, d);

    // unit token rows feed the cosine Jacobian
    Matrix zhat(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double nn = numerics::norm(tokens.row(i));
      if (!(nn > 0.0)) throw DegenerateVector("token row with zero norm");
      const double inv = 1.0 / nn;
      for (std::size_t t = 0; t < d; ++t) zhat(i, t) = tokens(i, t) * inv;
    }

    std::vector<Matrix> sims(kk);
    std::vector<double> logits(kk);
    for (std::size_t k = 0; k < kk; ++k) {
      sims[k] = numerics::cosine_matrix(tokens, prompts[k].w);
      const Matrix& plan = plans.image_plans[x][k];
      if (!plan.same_shape(sims[k])) throw ShapeMismatch("frozen plan shape mismatch");
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < mm; ++j) s += plan(i, j) * sims[k](i, j);
      logits[k] = s * inv_tau;
    }
    const ProbVector probs = numerics::softmax(logits, 1.0);
    const std::size_t y = static_cast<std::size_t>(batch[x].label);
    sw.img_loss = -std::log(probs[y]);

    if (with_grad) {
      std::vector<double> v(d);
      for (std::size_t k = 0; k < kk; ++k) {
        const double coef = (probs[k] - (k == y ? 1.0 : 0.0)) * inv_tau;
        const Matrix& plan = plans.image_plans[x][k];
        for (std::size_t j = 0; j < mm; ++j) {
          std::fill(v.begin(), v.end(), 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            const double tij = plan(i, j);
            if (tij == 0.0) continue;
            for (std::size_t t = 0; t < d; ++t) v[t] += tij * zhat(i, t);
          }
          const auto w = prompts[k].w.row(j);
          double wv = 0.0;
          for (std::size_t t = 0; t < d; ++t) wv += w[t] * v[t];
          const double scale = coef * prompts[k].inv_unorm[j];
          for (std::size_t t = 0; t < d; ++t) sw.grad(j, t) += scale * (v[t] - wv * w[t]);
        }
      }
    }

    if (cfg.distill == DistillMode::CE) {
      if (with_grad) sw.ce_grad = Matrix(mm, d);
      std::vector<double> teacher_logits(kk), student_logits(kk);
      std::vector<std::vector<double>> wbar(kk);
      const double zn = numerics::norm(batch[x].global);
      if (!(zn > 0.0)) throw DegenerateVector("zero-norm global feature");
      for (std::size_t k = 0; k < kk; ++k) {
        teacher_logits[k] = cosine(batch[x].global, centroids[k]);
        wbar[k].assign(d, 0.0);
        for (std::size_t m = 0; m < mm; ++m)
          for (std::size_t t = 0; t < d; ++t) wbar[k][t] += prompts[k].w(m, t);
        const double inv_m = 1.0 / static_cast<double>(mm);
        for (double& u : wbar[k]) u *= inv_m;
        student_logits[k] = cosine(batch[x].global, wbar[k]);
      }
      const ProbVector teacher = numerics::softmax(teacher_logits, cfg.tau);
      const ProbVector student = numerics::softmax(student_logits, cfg.tau);
      double ce = 0.0;
      for (std::size_t k = 0; k < kk; ++k) ce -= teacher[k] * std::log(student[k]);
      sw.ce_loss = ce;

      if (with_grad) {
        std::vector<double> dvec(d);
        const double inv_zn = 1.0 / zn;
        for (std::size_t k = 0; k < kk; ++k) {
          const double ccoef = (student[k] - teacher[k]) * inv_tau;
          const double wb_norm = numerics::norm(wbar[k]);
          const double inv_wb = 1.0 / wb_norm;
          const double c = student_logits[k];
          for (std::size_t t = 0; t < d; ++t)
            dvec[t] = (batch[x].global[t] * inv_zn - c * wbar[k][t] * inv_wb) * inv_wb;
          const double inv_m = 1.0 / static_cast<double>(mm);
          for (std::size_t m = 0; m < mm; ++m) {
            const auto w = prompts[k].w.row(m);
            double wv = 0.0;
            for (std::size_t t = 0; t < d; ++t) wv += w[t] * dvec[t];
            const double scale = ccoef * inv_m * prompts[k].inv_unorm[m];
            for (std::size_t t = 0; t < d; ++t) sw.ce_grad(m, t) += scale * (dvec[t] - wv * w[t]);
          }
        }
      }
    }
  });

  // ---- class-wise distillation (Cosine / WD)
  std::vector<double> class_loss(kk, 0.0);
  std::vector<Matrix> class_grad;
  if (with_grad) class_grad.assign(kk, Matrix());
  if (cfg.distill == DistillMode::Cosine || cfg.distill == DistillMode::WD) {
    const double inv_k = 1.0 / static_cast<double>(kk);
    parallel::for_each(kk, [&](std::size_t k) {
      const Matrix& block = desc.blocks[k];
      const std::size_t ee = block.rows();
      const PromptGraph& pg = prompts[k];
      std::vector<double> v(d);
      if (cfg.distill == DistillMode::Cosine) {
        class_loss[k] = class_cosine_loss(pg.w, block);
        if (with_grad) {
          class_grad[k] = Matrix(mm, d);
          std::vector<double> hbar(d, 0.0);
          for (std::size_t e = 0; e < ee; ++e)
            for (std::size_t t = 0; t < d; ++t) hbar[t] += block(e, t);
          const double scale0 = inv_k / (static_cast<double>(mm) * static_cast<double>(ee));
          for (std::size_t m = 0; m < mm; ++m) {
            const auto w = pg.w.row(m);
            double wv = 0.0;
            for (std::size_t t = 0; t < d; ++t) wv += w[t] * hbar[t];
            const double scale = -scale0 * pg.inv_unorm[m];
            for (std::size_t t = 0; t < d; ++t) class_grad[k](m, t) = scale * (hbar[t] - wv * w[t]);
          }
        }
      } else {  // WD with the frozen class plan
        const Matrix& plan = plans.distill_plans[k];
        if (plan.rows() != mm || plan.cols() != ee)
          throw ShapeMismatch("frozen distill plan shape mismatch");
        const Matrix cost = transport::wd_cost(pg.w, block);
        double s = 0.0;
        for (std::size_t m = 0; m < mm; ++m)
          for (std::size_t e = 0; e < ee; ++e) s += plan(m, e) * cost(m, e);
        class_loss[k] = s;
        if (with_grad) {
          class_grad[k] = Matrix(mm, d);
          for (std::size_t m = 0; m < mm; ++m) {
            std::fill(v.begin(), v.end(), 0.0);
            for (std::size_t e = 0; e < ee; ++e) {
              const double tme = plan(m, e);
              if (tme == 0.0) continue;
              for (std::size_t t = 0; t < d; ++t) v[t] += tme * block(e, t);
            }
            const auto w = pg.w.row(m);
            double wv = 0.0;
            for (std::size_t t = 0; t < d; ++t) wv += w[t] * v[t];
            const double scale = -inv_k * pg.inv_unorm[m];
            for (std::size_t t = 0; t < d; ++t) class_grad[k](m, t) = scale * (v[t] - wv * w[t]);
          }
        }
      }
    });
  }

  // ---- fixed-order reductions
  LossBreakdown bd;
  bd.beta = cfg.beta;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double img = 0.0, ce = 0.0;
  for (const SampleWork& sw : work) {
    img += sw.img_loss;
    ce += sw.ce_loss;
  }
  bd.l_img = img * inv_b;
  switch (cfg.distill) {
    case DistillMode::None:
      bd.l_llm = 0.0;
      break;
    case DistillMode::CE:
      bd.l_llm = ce * inv_b;
      break;
    default: {
      double s = 0.0;
      for (double v : class_loss) s += v;
      bd.l_llm = s / static_cast<double>(kk);
      break;
    }
  }
  bd.total = bd.beta * bd.l_llm + (1.0 - bd.beta) * bd.l_img;
  if (!std::isfinite(bd.total)) throw NonFiniteValue("loss is not finite");

  if (with_grad) {
    Matrix grad(mm, d);
    const double img_w = (1.0 - cfg.beta) * inv_b;
    for (const SampleWork& sw : work)
      for (std::size_t m = 0; m < mm; ++m)
        for (std::size_t t = 0; t < d; ++t) grad(m, t) += img_w * sw.grad(m, t);
    if (cfg.distill == DistillMode::CE) {
      const double ce_w = cfg.beta * inv_b;
      for (const SampleWork& sw : work)
        for (std::size_t m = 0; m < mm; ++m)
          for (std::size_t t = 0; t < d; ++t) grad(m, t) += ce_w * sw.ce_grad(m, t);
    } else if (cfg.distill != DistillMode::None) {
      for (std::size_t k = 0; k < kk; ++k)
        for (std::size_t m = 0; m < mm; ++m)
          for (std::size_t t = 0; t < d; ++t) grad(m, t) += cfg.beta * class_grad[k](m, t);
    }
    *grad_out = std::move(grad);
  }
  return bd;
}

}  // namespace

LossBreakdown frozen_plan_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                               const ClassDescriptors& desc, const AlignmentConfig& cfg,
                               const PlanSet& plans) {
  return evaluate_frozen(batch, bank, desc, cfg, plans, nullptr);
}

Matrix frozen_plan_gradient(std::span<const BatchInstance> batch, const ContextBank& bank,
                            const ClassDescriptors& desc, const AlignmentConfig& cfg,
                            const PlanSet& plans, LossBreakdown* breakdown) {
  Matrix grad;
  const LossBreakdown bd = evaluate_frozen(batch, bank, desc, cfg, plans, &grad);
  if (breakdown != nullptr) *breakdown = bd;
  return grad;
}

LossBreakdown total_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                         const ClassDescriptors& desc, const AlignmentConfig& cfg) {
  const PlanSet plans = solve_plan_set(batch, bank, desc, cfg);
  return frozen_plan_loss(batch, bank, desc, cfg, plans);
}

Matrix loss_gradient(std::span<const BatchInstance> batch, const ContextBank& bank,
                     const ClassDescriptors& desc, const AlignmentConfig& cfg,
                     LossBreakdown* breakdown) {
  const PlanSet plans = solve_plan_set(batch, bank, desc, cfg);
  return frozen_plan_gradient(batch, bank, desc, cfg, plans, breakdown);
}

}  // namespace dualpt::alignment
