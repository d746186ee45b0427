#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "meshlearn/errors.hpp"
#include "meshlearn/matrix.hpp"

namespace meshlearn {

// Probabilities below this are clamped before taking logs in the KL term.
inline constexpr double kKlProbFloor = 1e-12;

// Row-wise softmax with per-row max subtraction.
inline Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* in = logits.row_ptr(r);
    double* o = out.row_ptr(r);
    double mx = in[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) o[c] /= sum;
  }
  return out;
}

struct CrossEntropyResult {
  double loss = 0.0;     // batch mean negative log-likelihood
  Matrix grad_logits;    // (softmax - onehot) / batch_size
};

inline CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels vs logits " +
                     logits.shape_str());
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  for (std::size_t r = 0; r < n; ++r)
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k)
      throw InputError("cross_entropy: label " + std::to_string(labels[r]) +
                       " out of range at row " + std::to_string(r));

  CrossEntropyResult res;
  res.grad_logits = softmax(logits);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    // log-softmax evaluated stably from the raw logits.
    const double* in = logits.row_ptr(r);
    double mx = in[0];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(in[c] - mx);
    loss -= in[static_cast<std::size_t>(labels[r])] - mx - std::log(sum);
  }
  res.loss = loss / static_cast<double>(n);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double* g = res.grad_logits.row_ptr(r);
    g[static_cast<std::size_t>(labels[r])] -= 1.0;
    for (std::size_t c = 0; c < k; ++c) g[c] *= inv_n;
  }
  return res;
}

struct KlResult {
  double loss = 0.0;      // batch mean of row-wise D_KL(P || Q)
  Matrix grad_q_logits;   // gradient wrt the logits that produced q
};

// p and q are row-wise probability distributions; q is the one being trained.
// Zero entries of q are floored at kKlProbFloor inside the log; p == 0 terms
// contribute nothing.
inline KlResult kl_divergence(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q))
    throw ShapeError("kl_divergence: shape mismatch " + p.shape_str() + " vs " + q.shape_str());
  const std::size_t n = p.rows();
  KlResult res;
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* pr = p.row_ptr(r);
    const double* qr = q.row_ptr(r);
    for (std::size_t c = 0; c < p.cols(); ++c) {
      if (pr[c] <= 0.0) continue;
      const double qc = std::max(qr[c], kKlProbFloor);
      loss += pr[c] * (std::log(pr[c]) - std::log(qc));
    }
  }
  res.loss = loss / static_cast<double>(n);
  // With q = softmax(z): d/dz of the mean row KL is (q - p) / batch.
  res.grad_q_logits = Matrix(n, p.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < res.grad_q_logits.size(); ++i)
    res.grad_q_logits.values()[i] = (q.values()[i] - p.values()[i]) * inv_n;
  return res;
}

}  // namespace meshlearn
