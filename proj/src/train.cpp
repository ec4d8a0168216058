#include "naa/train.hpp"

#include <cmath>
#include <numeric>

#include "naa/rng.hpp"

namespace naa {

template <typename T>
void init_params(Network<T>& model, std::uint64_t seed) {
  Rng rng(seed);
  for (Layer<T>& l : model.mutable_layers()) {
    if (!l.has_params()) continue;
    const std::size_t fan_in = l.kind == LayerKind::dense ? l.in : l.in * l.kernel_h * l.kernel_w;
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (T& w : l.weights.data()) w = static_cast<T>(scale * rng.normal());
    for (T& b : l.bias.data()) b = T(0);
  }
}

template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label) {
  if (label >= logits.size()) throw ValueError("label out of range for logits");
  const auto z = logits.data();
  T m = z[0];
  for (T v : z) m = std::max(m, v);
  T denom = T(0);
  for (T v : z) denom += std::exp(v - m);
  LossAndGrad<T> r;
  r.loss = std::log(denom) - (z[label] - m);
  r.grad = Tensor<T>(logits.shape());
  for (std::size_t i = 0; i < z.size(); ++i) r.grad[i] = std::exp(z[i] - m) / denom;
  r.grad[label] -= T(1);
  return r;
}

template <typename T>
TrainResult<T> sgd_train(Network<T> model, const Dataset& data, const TrainOptions& o) {
  if (data.count() == 0) throw ValueError("training dataset is empty");
  if (data.image_shape() != model.input_shape()) {
    throw ShapeError("dataset image shape " + shape_str(data.image_shape()) + " does not match model input " +
                     shape_str(model.input_shape()));
  }
  for (std::uint16_t l : data.labels) {
    if (l >= model.class_count()) throw ValueError("label " + std::to_string(l) + " >= class_count");
  }
  if (o.batch_size == 0) throw ValueError("batch size must be positive");

  Rng rng(o.seed);
  std::vector<std::size_t> order(data.count());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<LayerGrads<T>> velocity = model.zero_grads();
  std::vector<std::vector<LayerGrads<T>>> slots(o.batch_size);
  std::vector<T> losses(o.batch_size);
  double last_epoch_loss = 0.0;

  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += o.batch_size) {
      const std::size_t batch = std::min(o.batch_size, order.size() - start);
      const auto b_n = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t bi = 0; bi < b_n; ++bi) {
        const auto s = static_cast<std::size_t>(bi);
        const std::size_t idx = order[start + s];
        slots[s] = model.zero_grads();
        const Trace<T> tr = model.trace(data.image<T>(idx));
        LossAndGrad<T> lg = softmax_cross_entropy(tr.acts.back(), data.labels[idx]);
        losses[s] = lg.loss;
        model.pullback(tr, model.layer_count(), std::move(lg.grad), 0, nullptr, &slots[s]);
      }
      T batch_loss = T(0);
      for (std::size_t s = 0; s < batch; ++s) batch_loss += losses[s];
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                              ", sample offset " + std::to_string(start) + " (learning rate " +
                              std::to_string(o.learning_rate) + ")");
      }
      epoch_loss += static_cast<double>(batch_loss);
      const T lr = static_cast<T>(o.learning_rate);
      const T mom = static_cast<T>(o.momentum);
      const T inv_b = T(1) / static_cast<T>(batch);
      auto& layers = model.mutable_layers();
      for (std::size_t li = 0; li < layers.size(); ++li) {
        if (!layers[li].has_params()) continue;
        auto update = [&](Tensor<T>& param, Tensor<T>& vel, auto member) {
          for (std::size_t k = 0; k < param.size(); ++k) {
            T g = T(0);
            for (std::size_t s = 0; s < batch; ++s) g += (slots[s][li].*member)[k];
            vel[k] = mom * vel[k] - lr * g * inv_b;
            param[k] += vel[k];
          }
        };
        update(layers[li].weights, velocity[li].weights, &LayerGrads<T>::weights);
        update(layers[li].bias, velocity[li].bias, &LayerGrads<T>::bias);
      }
    }
    last_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }

  TrainResult<T> r;
  r.train_accuracy = accuracy(model, data);
  r.final_loss = last_epoch_loss;
  r.model = std::move(model);
  return r;
}

template <typename T>
double accuracy(const Network<T>& model, const Dataset& data) {
  if (data.count() == 0) return 0.0;
  long correct = 0;
  const auto n = static_cast<std::ptrdiff_t>(data.count());
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (model.predict(data.image<T>(idx)) == data.labels[idx]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.count());
}

template void init_params<float>(Network<float>&, std::uint64_t);
template void init_params<double>(Network<double>&, std::uint64_t);
template LossAndGrad<float> softmax_cross_entropy<float>(const Tensor<float>&, std::size_t);
template LossAndGrad<double> softmax_cross_entropy<double>(const Tensor<double>&, std::size_t);
template TrainResult<float> sgd_train<float>(Network<float>, const Dataset&, const TrainOptions&);
template TrainResult<double> sgd_train<double>(Network<double>, const Dataset&, const TrainOptions&);
template double accuracy<float>(const Network<float>&, const Dataset&);
template double accuracy<double>(const Network<double>&, const Dataset&);

}  // namespace naa
