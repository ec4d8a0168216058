#pragma once

// Neuron attribution along the straight path from a baseline image x' to x.
//
// The path is sampled at right endpoints x_m = x' + (m/n)(x - x'), m = 1..n.
// F is the logit of `output_index`. Two estimators of the per-neuron share of
// F(x) - F(x') are provided:
//
//  * exact: (1/n) sum_m dF/dy_j(x_m) * <x - x', grad_x y_j(x_m)>, with one
//    reverse pass per neuron and path point. Expensive, assumption-free.
//  * factorized: (y_j - y'_j) * IA_j with IA_j = (1/n) sum_m dF/dy_j(x_m),
//    which drops the covariance between the two factors.

#include <cstddef>
#include <string>
#include <vector>

#include "naa/network.hpp"

namespace naa {

template <typename T>
struct PathSpec {
  Tensor<T> baseline;
  std::size_t steps = 30;

  /// Black-image baseline (all zeros).
  static PathSpec black(const Shape& input_shape, std::size_t steps) {
    return PathSpec{Tensor<T>(input_shape), steps};
  }

  /// x_m for m in 1..steps.
  Tensor<T> point(const Tensor<T>& x, std::size_t m) const;

  void validate(const Tensor<T>& x) const;
};

template <typename T>
struct IntegratedAttention {
  std::size_t tap = 0;
  std::size_t steps = 0;
  std::size_t backward_passes = 0;
  Tensor<T> values;
};

enum class AttributionMethod { exact_oracle, factorized };

std::string attribution_method_name(AttributionMethod m);

template <typename T>
struct AttributionField {
  std::size_t tap = 0;
  std::size_t steps = 0;
  AttributionMethod method = AttributionMethod::factorized;
  Tensor<T> values;
  T total = T(0);
};

inline constexpr std::size_t kDefaultNeuronCap = 4096;

/// IA(y_j) = (1/n) sum_m dF/dy_j(x_m); performs exactly `path.steps` reverse passes.
template <typename T>
IntegratedAttention<T> integrated_attention(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                            std::size_t tap, std::size_t output_index);

/// Brute-force per-neuron attribution without the factorization assumption.
/// Refuses taps with more than `neuron_cap` neurons.
template <typename T>
AttributionField<T> exact_neuron_attribution(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                             std::size_t tap, std::size_t output_index,
                                             std::size_t neuron_cap = kDefaultNeuronCap);

/// (y - y') ⊙ IA.
template <typename T>
AttributionField<T> factorized_attribution(const Tensor<T>& y, const Tensor<T>& y_baseline,
                                           const IntegratedAttention<T>& ia);

/// Convenience: runs the forward passes for y and y' and factorizes.
template <typename T>
AttributionField<T> factorized_attribution(const Network<T>& model, const Tensor<T>& x, const PathSpec<T>& path,
                                           std::size_t tap, std::size_t output_index);

struct CompletenessRecord {
  std::size_t tap = 0;
  std::size_t steps = 0;
  double total = 0.0;       // sum_j A_yj from the exact oracle
  double f_input = 0.0;     // F(x)
  double f_baseline = 0.0;  // F(x')
  double residual = 0.0;    // |total - (F(x) - F(x'))|
};

template <typename T>
std::vector<CompletenessRecord> completeness_report(const Network<T>& model, const Tensor<T>& x,
                                                    const PathSpec<T>& path, const std::vector<std::size_t>& taps,
                                                    std::size_t output_index,
                                                    std::size_t neuron_cap = kDefaultNeuronCap);

/// Pearson correlation of two equally sized fields.
template <typename T>
double pearson(std::span<const T> a, std::span<const T> b);

/// JSON record {tap, n, method, values, total, residual}.
template <typename T>
std::string attribution_to_json(const AttributionField<T>& field, double residual);

}  // namespace naa
