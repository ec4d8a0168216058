#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "naa/rng.hpp"
#include "naa/tensor.hpp"

namespace naa {

enum class TransformKind { linear, log, sqrt, square, exp };

/// Monotone map applied to nonnegative attribution magnitudes.
///
/// log is log(1 + a). The derivative of sqrt at exactly 0 is taken as 0 so
/// that neurons with zero attribution never produce infinite gradients.
struct TransformFn {
  TransformKind kind = TransformKind::linear;

  template <typename T>
  T apply(T a) const {
    switch (kind) {
      case TransformKind::linear: return a;
      case TransformKind::log: return std::log1p(a);
      case TransformKind::sqrt: return std::sqrt(a);
      case TransformKind::square: return a * a;
      case TransformKind::exp: return std::exp(a);
    }
    return a;
  }

  template <typename T>
  T derivative(T a) const {
    switch (kind) {
      case TransformKind::linear: return T(1);
      case TransformKind::log: return T(1) / (T(1) + a);
      case TransformKind::sqrt: return a > T(0) ? T(0.5) / std::sqrt(a) : T(0);
      case TransformKind::square: return T(2) * a;
      case TransformKind::exp: return std::exp(a);
    }
    return T(1);
  }

  std::string_view name() const;
  static std::optional<TransformFn> parse(std::string_view name);
  static const std::vector<TransformFn>& all();

  bool operator==(const TransformFn&) const = default;
};

struct DimParams {
  bool enabled = false;
  double probability = 0.7;
  /// Resize bounds as fractions of the input extent.
  double resize_low = 1.0;
  double resize_high = 1.1;

  bool operator==(const DimParams&) const = default;
};

/// One draw of the diverse-input transform, stored as a gather map: output
/// element k reads input element `source[k]`, or zero when it is -1. The map
/// is linear, so gradients flow back through `adjoint` (scatter-add).
struct DiverseInput {
  Shape shape;
  std::vector<std::int64_t> source;

  bool is_identity() const { return source.empty(); }

  template <typename T>
  Tensor<T> apply(const Tensor<T>& x) const {
    if (is_identity()) return x;
    Tensor<T> out(shape);
    for (std::size_t k = 0; k < source.size(); ++k) {
      if (source[k] >= 0) out[k] = x[static_cast<std::size_t>(source[k])];
    }
    return out;
  }

  template <typename T>
  Tensor<T> adjoint(const Tensor<T>& grad) const {
    if (is_identity()) return grad;
    Tensor<T> out(shape);
    for (std::size_t k = 0; k < source.size(); ++k) {
      if (source[k] >= 0) out[static_cast<std::size_t>(source[k])] += grad[k];
    }
    return out;
  }
};

/// With probability p: nearest-neighbour resize of the [C,H,W] image to a
/// random side r in [low*H, high*H], zero-pad at a random offset into a
/// canvas of side max(high*H, H), and resize the canvas back to H×W.
/// Otherwise the identity.
DiverseInput sample_dim(const Shape& shape, const DimParams& params, Rng& rng);

template <typename T>
Tensor<T> dim_transform(const Tensor<T>& x, const DimParams& params, Rng& rng) {
  return sample_dim(x.shape(), params, rng).apply(x);
}

struct PimParams {
  bool enabled = false;
  double amplification = 2.5;
  std::size_t kernel = 3;

  bool operator==(const PimParams&) const = default;
};

/// Spreads each pixel's value uniformly over its k×k neighbourhood in the
/// same channel (weight 1/k² per cell). Cells falling outside the image are
/// clamped to the nearest edge pixel, so total mass is conserved.
template <typename T>
Tensor<T> project_uniform(const Tensor<T>& cut, std::size_t kernel);

/// Patch-wise step. `direction` is the descent sign field (-sign(g)).
/// `amplification` is the running accumulated amplified noise, updated in
/// place. Returns the increment to add to x_adv before the final clip:
///   a += βα·d;  c = max(|a| - ε, 0)·sign(a);  p = βα·sign(W * c);  a += p
///   increment = βα·d + p
template <typename T>
Tensor<T> pim_step(const Tensor<T>& direction, double alpha, const PimParams& params, double epsilon,
                   Tensor<T>& amplification);

}  // namespace naa
