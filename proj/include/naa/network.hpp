#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "naa/layer.hpp"
#include "naa/tensor.hpp"

namespace naa {

using kernels::Exec;

/// Activations of one forward pass: `acts[0]` is the input and `acts[i + 1]`
/// is the output of layer `i`. A tap on layer `i` therefore reads `acts[i + 1]`.
template <typename T>
struct Trace {
  std::vector<Tensor<T>> acts;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;
  std::map<std::size_t, Tensor<T>> tap_activations;
};

template <typename T>
struct GradientBundle {
  T logit_value = T(0);
  Tensor<T> grad_wrt_input;
  std::map<std::size_t, Tensor<T>> grad_wrt_tap;
  std::map<std::size_t, Tensor<T>> tap_activations;
};

inline constexpr std::size_t kAllActs = std::numeric_limits<std::size_t>::max();

/// Sequential layer graph with named tap points.
///
/// A network is a value: forward and backward are const and keep no state,
/// so one instance can be shared by any number of threads.
template <typename T>
class Network {
 public:
  Network() = default;

  /// Validates the whole shape chain; the last layer must produce [class_count].
  Network(Shape input_shape, std::vector<Layer<T>> layers, std::size_t class_count,
          std::vector<std::size_t> taps = {});

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t class_count() const { return class_count_; }
  const std::vector<std::size_t>& taps() const { return taps_; }
  bool has_tap(std::size_t layer) const;
  /// Output shape of `layer`.
  const Shape& activation_shape(std::size_t layer) const { return shapes_.at(layer + 1); }

  Network with_taps(std::vector<std::size_t> taps) const;

  /// Parameter access for trainers and initializers. Shapes must not change.
  std::vector<Layer<T>>& mutable_layers() { return layers_; }

  /// Forward pass recording activations `acts[0..upto_act]`.
  Trace<T> trace(const Tensor<T>& x, std::size_t upto_act = kAllActs, Exec exec = Exec::parallel) const;

  ForwardResult<T> forward(const Tensor<T>& x, Exec exec = Exec::parallel) const;

  /// Reverse-mode derivatives of logits[output_index] w.r.t. the input and every tap.
  GradientBundle<T> backward(const Tensor<T>& x, std::size_t output_index, Exec exec = Exec::parallel) const;

  /// Propagates `grad` (w.r.t. `acts[from_act]`) down to `acts[to_act]`.
  /// Tap gradients met on the way are stored in `tap_grads`; parameter
  /// gradients of the traversed layers are accumulated into `params`.
  Tensor<T> pullback(const Trace<T>& trace, std::size_t from_act, Tensor<T> grad, std::size_t to_act,
                     std::map<std::size_t, Tensor<T>>* tap_grads = nullptr,
                     std::vector<LayerGrads<T>>* params = nullptr, Exec exec = Exec::parallel) const;

  std::vector<LayerGrads<T>> zero_grads() const;
  std::size_t predict(const Tensor<T>& x, Exec exec = Exec::parallel) const;
  std::size_t param_count() const;

  template <typename U>
  Network<U> cast() const {
    std::vector<Layer<U>> layers;
    layers.reserve(layers_.size());
    for (const auto& l : layers_) layers.push_back(l.template cast<U>());
    return Network<U>(input_shape_, std::move(layers), class_count_, taps_);
  }

  bool operator==(const Network& other) const {
    return input_shape_ == other.input_shape_ && layers_ == other.layers_ &&
           class_count_ == other.class_count_ && taps_ == other.taps_;
  }

 private:
  void check_input(const Tensor<T>& x) const;

  Shape input_shape_;
  std::vector<Layer<T>> layers_;
  std::size_t class_count_ = 0;
  std::vector<std::size_t> taps_;
  std::vector<Shape> shapes_;  // shapes_[k] is the shape of acts[k]
};

}  // namespace naa
