#pragma once

#include <cstdint>

#include "naa/dataset.hpp"
#include "naa/network.hpp"

namespace naa {

struct TrainOptions {
  std::size_t epochs = 2;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

template <typename T>
struct TrainResult {
  Network<T> model;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

/// He-normal weights, zero biases.
template <typename T>
void init_params(Network<T>& model, std::uint64_t seed);

template <typename T>
struct LossAndGrad {
  T loss = T(0);
  Tensor<T> grad;  // d loss / d logits
};

/// Softmax cross-entropy on logits, computed with the max-shift.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label);

/// Minibatch SGD with momentum on softmax cross-entropy.
///
/// Deterministic for a fixed seed: per-sample gradients are computed in
/// parallel into private slots and reduced in sample order. Throws
/// DivergenceError if the batch loss becomes non-finite.
template <typename T>
TrainResult<T> sgd_train(Network<T> model, const Dataset& data, const TrainOptions& options);

template <typename T>
double accuracy(const Network<T>& model, const Dataset& data);

}  // namespace naa
