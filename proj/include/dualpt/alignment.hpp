#ifndef DUALPT_ALIGNMENT_HPP
#define DUALPT_ALIGNMENT_HPP

#include <span>
#include <string>
#include <vector>

#include "dualpt/matrix.hpp"
#include "dualpt/transport.hpp"

namespace dualpt::alignment {

// How token/prompt plans are produced: full fused graph matching, the node
// cost alone (alpha = 0), the structural cost alone (alpha = 1), or a
// cross-attention map that bypasses transport entirely.
enum class AlignmentMode { Graph, Node, Edge, Attention };

// How prompts learn from the class descriptions: mean pairwise cosine
// distance, class-wise transport, instance-wise cross-entropy against a
// descriptor-centroid teacher, or nothing.
enum class DistillMode { Cosine, WD, CE, None };

const char* to_string(AlignmentMode mode);
const char* to_string(DistillMode mode);
AlignmentMode alignment_mode_from(const std::string& name);
DistillMode distill_mode_from(const std::string& name);

// Trainable shared context S plus frozen per-class anchors. The prompt set
// for class k is the unit-normalized rows of S + anchor_k.
struct ContextBank {
  Matrix s;        // M x d, trainable
  Matrix anchors;  // K x d, frozen

  std::size_t prompt_count() const { return s.rows(); }
  std::size_t class_count() const { return anchors.rows(); }
  std::size_t dim() const { return s.cols(); }
  void validate() const;
};

// Per-class descriptor embeddings; unit rows, counts may vary by class.
struct ClassDescriptors {
  std::vector<Matrix> blocks;

  std::size_t class_count() const { return blocks.size(); }
  void validate(std::size_t dim, std::size_t class_count) const;
};

struct LossBreakdown {
  double l_llm = 0.0;
  double l_img = 0.0;
  double total = 0.0;   // beta * l_llm + (1 - beta) * l_img
  double beta = 0.0;
};

struct AlignmentConfig {
  transport::SinkhornConfig sinkhorn;
  AlignmentMode align = AlignmentMode::Graph;
  DistillMode distill = DistillMode::Cosine;
  double beta = 0.2;           // weight of the distillation branch
  double tau = 0.01;           // logit temperature
  double attention_tau = 1.0;  // attention row-softmax temperature
};

// One labeled sample, viewed. cz may point at a cached cos(tokens, tokens)
// block (training precomputes it once per sample); leave it null otherwise.
struct BatchInstance {
  const Matrix* tokens = nullptr;
  std::span<const double> global;
  int label = 0;
  const Matrix* cz = nullptr;
};

Matrix token_graph(const Matrix& tokens);  // cos(Z, Z) for BatchInstance::cz

Matrix class_prompts(const ContextBank& bank, std::size_t k);

double distill_loss_cosine(const ContextBank& bank, const ClassDescriptors& desc);
double distill_loss_wd(const ContextBank& bank, const ClassDescriptors& desc,
                       const transport::SinkhornConfig& cfg);
double distill_loss_ce(std::span<const BatchInstance> batch, const ContextBank& bank,
                       const ClassDescriptors& desc, double tau);

// Row i of the plan is softmax_j(cos(z_i, w_j) / attention_tau) / N. Rows are
// uniform by construction; columns are unconstrained, so the plan carries
// feasibility_waived.
transport::TransportPlan attention_plan(const Matrix& z, const Matrix& w, double attention_tau);

ProbVector ot_predict(const Matrix& tokens, const ContextBank& bank,
                      const transport::SinkhornConfig& cfg, AlignmentMode mode, double tau,
                      double attention_tau = 1.0);

ProbVector global_predict(std::span<const double> z_global, const ContextBank& bank,
                          double tau, bool use_context);

double image_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                  const transport::SinkhornConfig& cfg, AlignmentMode mode, double tau,
                  double attention_tau = 1.0);

// Plans are constants under differentiation: solve them once at the current
// S, then evaluate loss and gradient with that set held fixed. The gradient
// is the exact derivative of frozen_plan_loss as a function of S, which is
// what the finite-difference oracle in the tests checks.
struct PlanSet {
  std::vector<std::vector<Matrix>> image_plans;  // [sample][class], N x M
  std::vector<Matrix> distill_plans;             // [class], M x e_k (WD distill only)
};

PlanSet solve_plan_set(std::span<const BatchInstance> batch, const ContextBank& bank,
                       const ClassDescriptors& desc, const AlignmentConfig& cfg);
LossBreakdown frozen_plan_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                               const ClassDescriptors& desc, const AlignmentConfig& cfg,
                               const PlanSet& plans);
Matrix frozen_plan_gradient(std::span<const BatchInstance> batch, const ContextBank& bank,
                            const ClassDescriptors& desc, const AlignmentConfig& cfg,
                            const PlanSet& plans, LossBreakdown* breakdown = nullptr);

LossBreakdown total_loss(std::span<const BatchInstance> batch, const ContextBank& bank,
                         const ClassDescriptors& desc, const AlignmentConfig& cfg);
Matrix loss_gradient(std::span<const BatchInstance> batch, const ContextBank& bank,
                     const ClassDescriptors& desc, const AlignmentConfig& cfg,
                     LossBreakdown* breakdown = nullptr);

}  // namespace dualpt::alignment

#endif  // DUALPT_ALIGNMENT_HPP
