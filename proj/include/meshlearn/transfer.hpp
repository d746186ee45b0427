#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/losses.hpp"
#include "meshlearn/matrix.hpp"
#include "meshlearn/optimizer.hpp"

namespace meshlearn {

// Coefficients of the combined objective (alpha * loss1 + beta * loss2) / 2.
struct LossWeights {
  double alpha;
  double beta;

  LossWeights(double a, double b) : alpha(a), beta(b) {
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0)
      throw InputError("LossWeights: alpha and beta must lie in [0, 1]");
    if (std::abs(a + b - 1.0) > 1e-12)
      throw InputError("LossWeights: alpha + beta must equal 1, got " + std::to_string(a + b));
  }

  static LossWeights from_alpha(double a) { return LossWeights(a, 1.0 - a); }
};

// The learnable transform fusing a source layer and a target layer into a new
// target layer: W* = [W_a | W_b] M + bias. M is 2n x n for an n x n hosted
// layer and has its own optimizer.
struct TransferModel {
  Matrix m;                  // 2n x n
  std::vector<double> bias;  // n, broadcast across rows of W*
  SgdState optimizer;

  // Selector-of-target start: M = [0 ; I], zero bias, so the fresh pipeline
  // reproduces the target layer exactly and transfer begins as the identity.
  static TransferModel selector_init(std::size_t n, double learning_rate, double momentum = 0.0) {
    TransferModel tm;
    tm.m = Matrix(2 * n, n);
    for (std::size_t j = 0; j < n; ++j) tm.m(n + j, j) = 1.0;
    tm.bias.assign(n, 0.0);
    tm.optimizer.learning_rate = learning_rate;
    tm.optimizer.momentum = momentum;
    return tm;
  }

  std::size_t hosted_dim() const { return m.cols(); }
};

// One knowledge-flow pipeline: fixed source agent, fixed hosted target layer.
struct Pipeline {
  int source_agent_id = -1;
  std::size_t target_layer_index = 0;  // the penultimate layer
  TransferModel model;
};

// Horizontal concatenation [W_a | W_b]; both inputs n x n, result n x 2n.
inline Matrix concat_weights(const Matrix& w_a, const Matrix& w_b) {
  if (w_a.rows() != w_a.cols())
    throw ShapeError("concat_weights: source weights not square: " + w_a.shape_str());
  if (!w_a.same_shape(w_b))
    throw ShapeError("concat_weights: shape mismatch " + w_a.shape_str() + " vs " +
                     w_b.shape_str());
  const std::size_t n = w_a.rows();
  Matrix out(n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = w_a(i, j);
      out(i, n + j) = w_b(i, j);
    }
  }
  return out;
}

// W* = concat M + bias (bias broadcast across rows).
inline Matrix apply_transfer(const TransferModel& tm, const Matrix& concat) {
  if (concat.cols() != tm.m.rows())
    throw ShapeError("apply_transfer: concat " + concat.shape_str() + " vs M " +
                     tm.m.shape_str());
  Matrix w_star = matmul(concat, tm.m);
  for (std::size_t i = 0; i < w_star.rows(); ++i) {
    double* row = w_star.row_ptr(i);
    for (std::size_t j = 0; j < w_star.cols(); ++j) row[j] += tm.bias[j];
  }
  return w_star;
}

// Diagnostic objective: mean |xW* + b - (xW_a + b)| plus mean |xW* + b - (xW_b + b)|.
// Logged only; pipeline training uses the combined loss.
inline double transfer_objective_l1(const Matrix& w_star, const Matrix& w_a, const Matrix& w_b,
                                    const Matrix& x, const std::vector<double>& bias) {
  auto affine = [&bias](const Matrix& xin, const Matrix& w) {
    Matrix z = matmul(xin, w);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += bias[c];
    return z;
  };
  const Matrix z_star = affine(x, w_star);
  const Matrix z_a = affine(x, w_a);
  const Matrix z_b = affine(x, w_b);
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < z_star.size(); ++i) {
    sum_a += std::abs(z_star.values()[i] - z_a.values()[i]);
    sum_b += std::abs(z_star.values()[i] - z_b.values()[i]);
  }
  const double count = static_cast<double>(z_star.size());
  return sum_a / count + sum_b / count;
}

inline double combined_loss(double loss1, double loss2, const LossWeights& w) {
  return (w.alpha * loss1 + w.beta * loss2) / 2.0;
}

// Which scalar drives the pipeline optimizer: the combined objective, or the
// KL term alone.
enum class PipelineObjective { combined, kl_only };

struct PipelineStepResult {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double combined = 0.0;
};

struct PipelineGradients {
  PipelineStepResult losses;
  Matrix grad_m;                  // 2n x n
  std::vector<double> grad_bias;  // n
  Matrix w_star;                  // the installed fused weights
};

// Installs W* into the hosted layer of `target` (weights only, the layer keeps
// its own bias), recomputes the full forward pass, and returns the losses plus
// the analytic gradient of the training objective wrt M and the transfer bias.
// `target_block` is the target-side half of the concatenation — the hosted
// layer as trained locally, frozen by the caller for the whole transfer phase
// so that repeated installs do not feed back into their own input.
// `source_probs` is the source model's output distribution on the same batch.
inline PipelineGradients pipeline_forward_backward(DenseNet& target, const Pipeline& pipe,
                                                   const Matrix& source_weights,
                                                   const Matrix& target_block,
                                                   const Matrix& source_probs, const Matrix& x,
                                                   const std::vector<int>& labels,
                                                   const LossWeights& w,
                                                   PipelineObjective objective) {
  const std::size_t li = pipe.target_layer_index;
  if (li >= target.layers.size())
    throw ConfigError("pipeline: hosted layer index " + std::to_string(li) + " out of range");
  Matrix& hosted = target.layers[li].weights;
  if (!source_weights.same_shape(hosted))
    throw ShapeError("pipeline: source layer " + source_weights.shape_str() +
                     " vs target layer " + hosted.shape_str());

  const Matrix cat = concat_weights(source_weights, target_block);
  Matrix w_star = apply_transfer(pipe.model, cat);
  hosted = w_star;

  ForwardCache cache;
  const Matrix logits = forward(target, x, &cache);
  const CrossEntropyResult ce = cross_entropy(logits, labels);
  const Matrix q = softmax(logits);
  const KlResult kl = kl_divergence(source_probs, q);

  PipelineGradients out;
  out.losses.loss1 = ce.loss;
  out.losses.loss2 = kl.loss;
  out.losses.combined = combined_loss(ce.loss, kl.loss, w);

  Matrix grad_logits(logits.rows(), logits.cols());
  if (objective == PipelineObjective::combined) {
    const double ca = w.alpha / 2.0;
    const double cb = w.beta / 2.0;
    for (std::size_t i = 0; i < grad_logits.size(); ++i)
      grad_logits.values()[i] =
          ca * ce.grad_logits.values()[i] + cb * kl.grad_q_logits.values()[i];
  } else {
    grad_logits = kl.grad_q_logits;
  }

  const std::vector<LayerGrads> grads = backward(target, cache, grad_logits);
  const Matrix& grad_w_star = grads[li].weights;

  out.grad_m = matmul(transpose(cat), grad_w_star);
  out.grad_bias.assign(grad_w_star.cols(), 0.0);
  for (std::size_t i = 0; i < grad_w_star.rows(); ++i)
    for (std::size_t j = 0; j < grad_w_star.cols(); ++j)
      out.grad_bias[j] += grad_w_star(i, j);
  out.w_star = std::move(w_star);
  return out;
}

// One pipeline optimization step. The hosted layer is left holding the W*
// produced by the post-update transfer model; no other target parameter and no
// source parameter is touched. `target_block` must stay fixed across the steps
// of a transfer phase (pass the layer as it stood when the phase began):
// feeding each install back into the next concat compounds the mixing matrix
// once per step and diverges.
inline PipelineStepResult pipeline_step(DenseNet& target, Pipeline& pipe,
                                        const Matrix& source_weights, const Matrix& target_block,
                                        const Matrix& source_probs, const Matrix& x,
                                        const std::vector<int>& labels, const LossWeights& w,
                                        PipelineObjective objective = PipelineObjective::combined) {
  const std::size_t li = pipe.target_layer_index;
  const Matrix cat = concat_weights(source_weights, target_block);

  PipelineGradients g = pipeline_forward_backward(target, pipe, source_weights, target_block,
                                                  source_probs, x, labels, w, objective);

  TransferModel& tm = pipe.model;
  if (tm.optimizer.momentum != 0.0 && tm.optimizer.velocity.empty())
    tm.optimizer.velocity.resize(2);
  std::vector<double>* vm = tm.optimizer.momentum != 0.0 ? &tm.optimizer.velocity[0] : nullptr;
  std::vector<double>* vb = tm.optimizer.momentum != 0.0 ? &tm.optimizer.velocity[1] : nullptr;
  sgd_step_buffer(tm.m.values(), g.grad_m.values(), vm, tm.optimizer.learning_rate,
                  tm.optimizer.momentum);
  sgd_step_buffer(tm.bias, g.grad_bias, vb, tm.optimizer.learning_rate, tm.optimizer.momentum);

  target.layers[li].weights = apply_transfer(tm, cat);
  return g.losses;
}

}  // namespace meshlearn
