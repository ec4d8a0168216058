#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "naa/kernels.hpp"
#include "naa/tensor.hpp"

namespace naa {

/// Tags double as the on-disk kind byte of the model format.
enum class LayerKind : std::uint8_t {
  dense = 1,
  conv2d = 2,
  relu = 3,
  maxpool2d = 4,
  avgpool2d = 5,
  flatten = 6,
  logits = 7,  // identity marker: its output is the logit vector F; softmax is applied only by losses
};

std::string_view layer_kind_name(LayerKind kind);
std::optional<LayerKind> layer_kind_from_name(std::string_view name);

/// One layer of a sequential network.
///
/// `in`/`out` are channel counts for conv2d and feature counts for dense.
/// Pools use `kernel_h`×`kernel_w` windows with `stride` and no padding.
template <typename T>
struct Layer {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor<T> weights;
  Tensor<T> bias;

  static Layer dense(std::size_t in_features, std::size_t out_features);
  static Layer conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                      std::size_t stride = 1, std::size_t padding = 0);
  static Layer relu();
  static Layer maxpool2d(std::size_t kernel, std::size_t stride);
  static Layer avgpool2d(std::size_t kernel, std::size_t stride);
  static Layer flatten();
  static Layer logits();

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  std::size_t param_count() const { return weights.size() + bias.size(); }

  /// Output shape for a given input shape; throws ShapeError when incompatible.
  Shape output_shape(const Shape& input) const;

  kernels::ConvGeometry conv_geometry(const Shape& input) const;

  template <typename U>
  Layer<U> cast() const {
    Layer<U> l;
    l.kind = kind;
    l.in = in;
    l.out = out;
    l.kernel_h = kernel_h;
    l.kernel_w = kernel_w;
    l.stride = stride;
    l.padding = padding;
    if (!weights.empty()) l.weights = weights.template cast<U>();
    if (!bias.empty()) l.bias = bias.template cast<U>();
    return l;
  }

  bool operator==(const Layer&) const = default;
};

/// Gradients of one layer's parameters (empty for parameter-free layers).
template <typename T>
struct LayerGrads {
  Tensor<T> weights;
  Tensor<T> bias;
};

/// Applies layer `layer` to `in`, writing into `out` (already shaped).
template <typename T>
void layer_forward(const Layer<T>& layer, const Tensor<T>& in, Tensor<T>& out, kernels::Exec exec);

/// Pulls `grad_out` back through `layer` evaluated at `in`. When `params` is
/// non-null the parameter gradients are accumulated into it.
template <typename T>
Tensor<T> layer_backward(const Layer<T>& layer, const Tensor<T>& in, const Tensor<T>& grad_out,
                         LayerGrads<T>* params, kernels::Exec exec);

}  // namespace naa
