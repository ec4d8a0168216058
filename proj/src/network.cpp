#include "naa/network.hpp"

#include <algorithm>

namespace naa {

template <typename T>
Network<T>::Network(Shape input_shape, std::vector<Layer<T>> layers, std::size_t class_count,
                    std::vector<std::size_t> taps)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      class_count_(class_count),
      taps_(std::move(taps)) {
  if (class_count_ == 0) throw ShapeError("class_count must be positive");
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t e : input_shape_) {
    if (e == 0) throw ShapeError("input extents must be positive");
  }
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shapes_.push_back(layers_[i].output_shape(shapes_.back()));
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
  if (shapes_.back() != Shape{class_count_}) {
    throw ShapeError("network output " + shape_str(shapes_.back()) + " does not match class_count " +
                     std::to_string(class_count_));
  }
  std::sort(taps_.begin(), taps_.end());
  taps_.erase(std::unique(taps_.begin(), taps_.end()), taps_.end());
  for (std::size_t t : taps_) {
    if (t >= layers_.size()) {
      throw ShapeError("tap " + std::to_string(t) + " is not a valid layer index (network has " +
                       std::to_string(layers_.size()) + " layers)");
    }
  }
}

template <typename T>
bool Network<T>::has_tap(std::size_t layer) const {
  return std::binary_search(taps_.begin(), taps_.end(), layer);
}

template <typename T>
Network<T> Network<T>::with_taps(std::vector<std::size_t> taps) const {
  return Network(input_shape_, layers_, class_count_, std::move(taps));
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& x) const {
  if (x.shape() != input_shape_) {
    throw ShapeError("input shape " + shape_str(x.shape()) + " does not match model input " +
                     shape_str(input_shape_));
  }
}

template <typename T>
Trace<T> Network<T>::trace(const Tensor<T>& x, std::size_t upto_act, Exec exec) const {
  check_input(x);
  const std::size_t last = std::min(upto_act, layers_.size());
  Trace<T> tr;
  tr.acts.reserve(last + 1);
  tr.acts.push_back(x);
  for (std::size_t i = 0; i < last; ++i) {
    Tensor<T> out(shapes_[i + 1]);
    layer_forward(layers_[i], tr.acts.back(), out, exec);
    tr.acts.push_back(std::move(out));
  }
  return tr;
}

template <typename T>
ForwardResult<T> Network<T>::forward(const Tensor<T>& x, Exec exec) const {
  Trace<T> tr = trace(x, kAllActs, exec);
  ForwardResult<T> r;
  for (std::size_t t : taps_) r.tap_activations.emplace(t, tr.acts[t + 1]);
  r.logits = std::move(tr.acts.back());
  return r;
}

template <typename T>
Tensor<T> Network<T>::pullback(const Trace<T>& tr, std::size_t from_act, Tensor<T> grad, std::size_t to_act,
                               std::map<std::size_t, Tensor<T>>* tap_grads,
                               std::vector<LayerGrads<T>>* params, Exec exec) const {
  if (from_act >= tr.acts.size() || to_act > from_act) {
    throw ShapeError("pullback range [" + std::to_string(to_act) + ", " + std::to_string(from_act) +
                     "] outside recorded trace");
  }
  if (grad.shape() != shapes_[from_act]) {
    throw ShapeError("seed gradient " + shape_str(grad.shape()) + " does not match activation " +
                     shape_str(shapes_[from_act]));
  }
  for (std::size_t k = from_act; k > to_act; --k) {
    const std::size_t layer = k - 1;
    if (tap_grads && has_tap(layer)) (*tap_grads)[layer] = grad;
    LayerGrads<T>* pg = params ? &(*params)[layer] : nullptr;
    grad = layer_backward(layers_[layer], tr.acts[layer], grad, pg, exec);
  }
  return grad;
}

template <typename T>
GradientBundle<T> Network<T>::backward(const Tensor<T>& x, std::size_t output_index, Exec exec) const {
  if (output_index >= class_count_) {
    throw ValueError("output index " + std::to_string(output_index) + " >= class_count " +
                     std::to_string(class_count_));
  }
  Trace<T> tr = trace(x, kAllActs, exec);
  GradientBundle<T> b;
  b.logit_value = tr.acts.back()[output_index];
  for (std::size_t t : taps_) b.tap_activations.emplace(t, tr.acts[t + 1]);
  Tensor<T> seed(shapes_.back());
  seed[output_index] = T(1);
  b.grad_wrt_input = pullback(tr, layers_.size(), std::move(seed), 0, &b.grad_wrt_tap, nullptr, exec);
  return b;
}

template <typename T>
std::vector<LayerGrads<T>> Network<T>::zero_grads() const {
  std::vector<LayerGrads<T>> g(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_params()) {
      g[i].weights = Tensor<T>(layers_[i].weights.shape());
      g[i].bias = Tensor<T>(layers_[i].bias.shape());
    }
  }
  return g;
}

template <typename T>
std::size_t Network<T>::predict(const Tensor<T>& x, Exec exec) const {
  const Trace<T> tr = trace(x, kAllActs, exec);
  return argmax<T>(tr.acts.back().data());
}

template <typename T>
std::size_t Network<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

template class Network<float>;
template class Network<double>;

}  // namespace naa
