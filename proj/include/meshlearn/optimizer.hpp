#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"

namespace meshlearn {

// Plain stochastic gradient descent with optional momentum:
//   v <- mu * v + g;  p <- p - lr * v
// With mu == 0 the update is exactly p - lr * g and no velocity is kept.
struct SgdState {
  double learning_rate = 0.01;
  double momentum = 0.0;  // in [0, 1)
  // One flat buffer per parameter tensor, allocated on first momentum step;
  // shapes mirror the parameter order given to sgd_step.
  std::vector<std::vector<double>> velocity;
};

inline void sgd_step_buffer(std::vector<double>& params, const std::vector<double>& grads,
                            std::vector<double>* velocity, double lr, double mu) {
  if (params.size() != grads.size())
    throw ShapeError("sgd_step: param size " + std::to_string(params.size()) +
                     " vs grad size " + std::to_string(grads.size()));
  if (mu == 0.0) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    return;
  }
  if (velocity->empty()) velocity->assign(params.size(), 0.0);
  if (velocity->size() != params.size())
    throw ShapeError("sgd_step: velocity size " + std::to_string(velocity->size()) +
                     " vs param size " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    (*velocity)[i] = mu * (*velocity)[i] + grads[i];
    params[i] -= lr * (*velocity)[i];
  }
}

inline void sgd_step(DenseNet& net, const std::vector<LayerGrads>& grads, SgdState& state) {
  if (grads.size() != net.layers.size())
    throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " layer grads vs " +
                     std::to_string(net.layers.size()) + " layers");
  if (state.momentum != 0.0 && state.velocity.empty())
    state.velocity.resize(2 * net.layers.size());
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    DenseLayer& layer = net.layers[li];
    if (!layer.weights.same_shape(grads[li].weights))
      throw ShapeError("sgd_step: weight grad " + grads[li].weights.shape_str() +
                       " vs params " + layer.weights.shape_str());
    std::vector<double>* vw = state.momentum != 0.0 ? &state.velocity[2 * li] : nullptr;
    std::vector<double>* vb = state.momentum != 0.0 ? &state.velocity[2 * li + 1] : nullptr;
    sgd_step_buffer(layer.weights.values(), grads[li].weights.values(), vw,
                    state.learning_rate, state.momentum);
    sgd_step_buffer(layer.bias, grads[li].bias, vb, state.learning_rate, state.momentum);
  }
}

}  // namespace meshlearn
