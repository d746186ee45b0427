#pragma once

#include <cstddef>
#include <vector>

#include "meshlearn/errors.hpp"
#include "meshlearn/matrix.hpp"
#include "meshlearn/rng.hpp"

namespace meshlearn {

struct DenseLayer {
  Matrix weights;            // n_in x n_out
  std::vector<double> bias;  // n_out

  std::size_t n_in() const { return weights.rows(); }
  std::size_t n_out() const { return weights.cols(); }
};

// Feed-forward classifier over row-vector batches: z = x W + b per layer,
// ReLU on hidden layers, raw logits out of the last layer.
struct DenseNet {
  std::vector<DenseLayer> layers;

  // dims = {input, hidden..., output}; needs at least one layer.
  static DenseNet make(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ConfigError("DenseNet::make: need at least input and output dims");
    DenseNet net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      DenseLayer layer;
      layer.weights = Matrix(dims[i], dims[i + 1]);
      layer.bias.assign(dims[i + 1], 0.0);
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  std::size_t input_dim() const { return layers.front().n_in(); }
  std::size_t output_dim() const { return layers.back().n_out(); }

  // The layer immediately before the output layer hosts transfer pipelines.
  std::size_t penultimate_index() const {
    if (layers.size() < 2)
      throw ConfigError("penultimate_index: network has fewer than two layers");
    return layers.size() - 2;
  }

  void check_consistent() const {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
      if (layers[i].n_out() != layers[i + 1].n_in())
        throw ShapeError("DenseNet: layer " + std::to_string(i) + " out " +
                         std::to_string(layers[i].n_out()) + " vs layer " +
                         std::to_string(i + 1) + " in " +
                         std::to_string(layers[i + 1].n_in()));
  }
};

struct ForwardCache {
  std::vector<Matrix> inputs;   // the x fed into each layer
  std::vector<Matrix> preacts;  // z = x W + b per layer
};

inline Matrix forward(const DenseNet& net, const Matrix& x, ForwardCache* cache = nullptr) {
  if (x.cols() != net.input_dim())
    throw ShapeError("forward: input " + x.shape_str() + " vs expected cols " +
                     std::to_string(net.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  Matrix cur = x;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const DenseLayer& layer = net.layers[li];
    Matrix z = matmul(cur, layer.weights);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double* row = z.row_ptr(r);
      for (std::size_t c = 0; c < z.cols(); ++c) row[c] += layer.bias[c];
    }
    if (cache) {
      cache->inputs.push_back(std::move(cur));
      cache->preacts.push_back(z);
    }
    const bool is_last = (li + 1 == net.layers.size());
    if (!is_last) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(z);
  }
  return cur;
}

struct LayerGrads {
  Matrix weights;
  std::vector<double> bias;
};

// Analytic gradients for every layer given d(loss)/d(logits).
inline std::vector<LayerGrads> backward(const DenseNet& net, const ForwardCache& cache,
                                        const Matrix& grad_logits) {
  const std::size_t n_layers = net.layers.size();
  if (cache.inputs.size() != n_layers || cache.preacts.size() != n_layers)
    throw InputError("backward: cache does not match network (run forward with a cache first)");
  if (grad_logits.rows() != cache.inputs[0].rows() ||
      grad_logits.cols() != net.output_dim())
    throw ShapeError("backward: grad_logits " + grad_logits.shape_str() +
                     " vs logits " + std::to_string(cache.inputs[0].rows()) + "x" +
                     std::to_string(net.output_dim()));

  std::vector<LayerGrads> grads(n_layers);
  Matrix g = grad_logits;  // gradient wrt the current layer's pre-activation
  for (std::size_t li = n_layers; li-- > 0;) {
    // cache.inputs[li] is already post-activation of the previous layer.
    grads[li].weights = matmul(transpose(cache.inputs[li]), g);
    grads[li].bias.assign(net.layers[li].n_out(), 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) grads[li].bias[c] += g(r, c);
    if (li > 0) {
      Matrix g_prev = matmul(g, transpose(net.layers[li].weights));
      const Matrix& z_prev = cache.preacts[li - 1];
      for (std::size_t i = 0; i < g_prev.size(); ++i)
        if (!(z_prev.values()[i] > 0.0)) g_prev.values()[i] = 0.0;
      g = std::move(g_prev);
    }
  }
  return grads;
}

// Uniform(-sqrt(6/(n_in+n_out)), +sqrt(6/(n_in+n_out))) weights, zero biases.
inline void init_weights(DenseNet& net, RngStream& rng) {
  for (DenseLayer& layer : net.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.n_in() + layer.n_out()));
    for (double& v : layer.weights.values()) v = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = 0.0;
  }
}

}  // namespace meshlearn
