#include "naa/attribution.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace naa {
namespace {

template <typename T>
void check_tap(const Network<T>& model, std::size_t tap) {
  if (!model.has_tap(tap)) {
    throw ValueError("layer " + std::to_string(tap) + " is not a registered tap");
  }
}

template <typename T>
void check_output(const Network<T>& model, std::size_t output_index) {
  if (output_index >= model.class_count()) {
    throw ValueError("output index " + std::to_string(output_index) + " >= class_count");
  }
}

template <typename T>
Tensor<T> one_hot(const Shape& shape, std::size_t index) {
  Tensor<T> t(shape);
  t[index] = T(1);
  return t;
}

}  // namespace

std::string attribution_method_name(AttributionMethod m) {
  return m == AttributionMethod::exact_oracle ? "exact-oracle" : "factorized";
}

template <typename T>
Tensor<T> PathSpec<T>::point(const Tensor<T>& x, std::size_t m) const {
  const T alpha = static_cast<T>(m) / static_cast<T>(steps);
  Tensor<T> p(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = baseline[i] + alpha * (x[i] - baseline[i]);
  return p;
}

template <typename T>
void PathSpec<T>::validate(const Tensor<T>& x) const {
  if (steps == 0) throw ValueError("path needs at least one step (n >= 1)");
  if (baseline.shape() != x.shape()) {
    throw ShapeError("baseline shape " + shape_str(baseline.shape()) + " differs from input " + shape_str(x.shape()));
  }
}

template <typename T>
IntegratedAttention<T> integrated_attention(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                            std::size_t tap, std::size_t output_index) {
  path.validate(x);
  check_tap(model, tap);
  check_output(model, output_index);
  IntegratedAttention<T> ia;
  ia.tap = tap;
  ia.steps = path.steps;
  ia.values = Tensor<T>(model.activation_shape(tap));
  const std::size_t top = model.layer_count();
  for (std::size_t m = 1; m <= path.steps; ++m) {
    const Trace<T> tr = model.trace(path.point(x, m));
    const Tensor<T> g = model.pullback(tr, top, one_hot<T>({model.class_count()}, output_index), tap + 1);
    for (std::size_t j = 0; j < g.size(); ++j) ia.values[j] += g[j];
    ++ia.backward_passes;
  }
  const T inv_n = T(1) / static_cast<T>(path.steps);
  for (T& v : ia.values.data()) v *= inv_n;
  return ia;
}

template <typename T>
AttributionField<T> exact_neuron_attribution(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                             std::size_t tap, std::size_t output_index, std::size_t neuron_cap) {
  path.validate(x);
  check_tap(model, tap);
  check_output(model, output_index);
  const Shape& tap_shape = model.activation_shape(tap);
  const std::size_t neurons = shape_size(tap_shape);
  if (neurons > neuron_cap) {
    throw ValueError("exact attribution refused: tap " + std::to_string(tap) + " has " + std::to_string(neurons) +
                     " neurons, above the cap of " + std::to_string(neuron_cap));
  }
  Tensor<T> direction(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) direction[i] = x[i] - path.baseline[i];

  std::vector<T> acc(neurons, T(0));
  const std::size_t top = model.layer_count();
  for (std::size_t m = 1; m <= path.steps; ++m) {
    const Trace<T> tr = model.trace(path.point(x, m));
    const Tensor<T> upper = model.pullback(tr, top, one_hot<T>({model.class_count()}, output_index), tap + 1);
    const auto count = static_cast<std::ptrdiff_t>(neurons);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t ji = 0; ji < count; ++ji) {
      const auto j = static_cast<std::size_t>(ji);
      // A zero upstream gradient contributes exactly zero; skip the reverse pass.
      if (upper[j] == T(0)) continue;
      // Nested regions run single-threaded, so the parallel kernels here are
      // just the faster loop order and stay deterministic.
      Tensor<T> local = model.pullback(tr, tap + 1, one_hot<T>(tap_shape, j), tap, nullptr, nullptr, Exec::parallel);
      // Dead units (e.g. a relu with negative input) have a zero input-gradient row.
      if (std::all_of(local.data().begin(), local.data().end(), [](T v) { return v == T(0); })) continue;
      const Tensor<T> row = model.pullback(tr, tap, std::move(local), 0, nullptr, nullptr, Exec::parallel);
      acc[j] += upper[j] * dot<T>(row.data(), direction.data());
    }
  }
  AttributionField<T> f;
  f.tap = tap;
  f.steps = path.steps;
  f.method = AttributionMethod::exact_oracle;
  f.values = Tensor<T>(tap_shape);
  const T inv_n = T(1) / static_cast<T>(path.steps);
  for (std::size_t j = 0; j < neurons; ++j) f.values[j] = acc[j] * inv_n;
  f.total = pairwise_sum<T>(f.values.data());
  return f;
}

template <typename T>
AttributionField<T> factorized_attribution(const Tensor<T>& y, const Tensor<T>& y_baseline,
                                           const IntegratedAttention<T>& ia) {
  if (y.shape() != y_baseline.shape() || y.shape() != ia.values.shape()) {
    throw ShapeError("factorized attribution: shapes " + shape_str(y.shape()) + ", " +
                     shape_str(y_baseline.shape()) + ", " + shape_str(ia.values.shape()) + " disagree");
  }
  AttributionField<T> f;
  f.tap = ia.tap;
  f.steps = ia.steps;
  f.method = AttributionMethod::factorized;
  f.values = Tensor<T>(y.shape());
  for (std::size_t j = 0; j < y.size(); ++j) f.values[j] = (y[j] - y_baseline[j]) * ia.values[j];
  f.total = pairwise_sum<T>(f.values.data());
  return f;
}

template <typename T>
AttributionField<T> factorized_attribution(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                           std::size_t tap, std::size_t output_index) {
  const IntegratedAttention<T> ia = integrated_attention(model, x, path, tap, output_index);
  const Trace<T> tx = model.trace(x, tap + 1);
  const Trace<T> tb = model.trace(path.baseline, tap + 1);
  return factorized_attribution(tx.acts[tap + 1], tb.acts[tap + 1], ia);
}

template <typename T>
std::vector<CompletenessRecord> completeness_report(const Network<T>& model, const Tensor<T>& x,
                                                    const PathSpec<T>& path, const std::vector<std::size_t>& taps,
                                                    std::size_t output_index, std::size_t neuron_cap) {
  path.validate(x);
  check_output(model, output_index);
  const double fx = static_cast<double>(model.forward(x).logits[output_index]);
  const double fb = static_cast<double>(model.forward(path.baseline).logits[output_index]);
  std::vector<CompletenessRecord> out;
  for (std::size_t tap : taps) {
    const AttributionField<T> f = exact_neuron_attribution(model, x, path, tap, output_index, neuron_cap);
    CompletenessRecord r;
    r.tap = tap;
    r.steps = path.steps;
    r.total = static_cast<double>(f.total);
    r.f_input = fx;
    r.f_baseline = fb;
    r.residual = std::abs(r.total - (fx - fb));
    out.push_back(r);
  }
  return out;
}

template <typename T>
double pearson(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("pearson: size mismatch or empty input");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += static_cast<double>(a[i]);
    mb += static_cast<double>(b[i]);
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = static_cast<double>(a[i]) - ma, db = static_cast<double>(b[i]) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

template <typename T>
std::string attribution_to_json(const AttributionField<T>& field, double residual) {
  nlohmann::ordered_json j;
  j["tap"] = field.tap;
  j["n"] = field.steps;
  j["method"] = attribution_method_name(field.method);
  std::vector<double> values(field.values.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(field.values[i]);
  j["values"] = values;
  j["total"] = static_cast<double>(field.total);
  j["residual"] = residual;
  return j.dump();
}

#define NAA_INSTANTIATE(T)                                                                                     \
  template struct PathSpec<T>;                                                                                 \
  template IntegratedAttention<T> integrated_attention<T>(const Network<T>&, const Tensor<T>&,                \
                                                          const PathSpec<T>&, std::size_t, std::size_t);       \
  template AttributionField<T> exact_neuron_attribution<T>(const Network<T>&, const Tensor<T>&,               \
                                                           const PathSpec<T>&, std::size_t, std::size_t,       \
                                                           std::size_t);                                       \
  template AttributionField<T> factorized_attribution<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                                         const IntegratedAttention<T>&);                       \
  template AttributionField<T> factorized_attribution<T>(const Network<T>&, const Tensor<T>&,                 \
                                                         const PathSpec<T>&, std::size_t, std::size_t);        \
  template std::vector<CompletenessRecord> completeness_report<T>(const Network<T>&, const Tensor<T>&,        \
                                                                  const PathSpec<T>&,                          \
                                                                  const std::vector<std::size_t>&, std::size_t, \
                                                                  std::size_t);                                \
  template double pearson<T>(std::span<const T>, std::span<const T>);                                          \
  template std::string attribution_to_json<T>(const AttributionField<T>&, double);

NAA_INSTANTIATE(float)
NAA_INSTANTIATE(double)
#undef NAA_INSTANTIATE

}  // namespace naa
