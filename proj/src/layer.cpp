#include "naa/layer.hpp"

#include <array>

namespace naa {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 7> kKindNames{{
    {LayerKind::dense, "dense"},
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::relu, "relu"},
    {LayerKind::maxpool2d, "maxpool2d"},
    {LayerKind::avgpool2d, "avgpool2d"},
    {LayerKind::flatten, "flatten"},
    {LayerKind::logits, "logits"},
}};

template <typename T>
void pool_forward(const Layer<T>& l, const Tensor<T>& in, Tensor<T>& out) {
  const std::size_t c_n = in.shape()[0], h = in.shape()[1], w = in.shape()[2];
  const std::size_t oh_n = out.shape()[1], ow_n = out.shape()[2];
  const T inv_area = T(1) / static_cast<T>(l.kernel_h * l.kernel_w);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const std::size_t h0 = oh * l.stride, w0 = ow * l.stride;
        T acc = l.kind == LayerKind::maxpool2d ? in[(c * h + h0) * w + w0] : T(0);
        for (std::size_t kh = 0; kh < l.kernel_h; ++kh) {
          for (std::size_t kw = 0; kw < l.kernel_w; ++kw) {
            const T v = in[(c * h + h0 + kh) * w + w0 + kw];
            if (l.kind == LayerKind::maxpool2d) {
              if (v > acc) acc = v;
            } else {
              acc += v;
            }
          }
        }
        out[(c * oh_n + oh) * ow_n + ow] = l.kind == LayerKind::maxpool2d ? acc : acc * inv_area;
      }
    }
  }
}

template <typename T>
Tensor<T> pool_backward(const Layer<T>& l, const Tensor<T>& in, const Tensor<T>& grad_out) {
  Tensor<T> grad_in(in.shape());
  const std::size_t c_n = in.shape()[0], h = in.shape()[1], w = in.shape()[2];
  const std::size_t oh_n = grad_out.shape()[1], ow_n = grad_out.shape()[2];
  const T inv_area = T(1) / static_cast<T>(l.kernel_h * l.kernel_w);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const T g = grad_out[(c * oh_n + oh) * ow_n + ow];
        const std::size_t h0 = oh * l.stride, w0 = ow * l.stride;
        if (l.kind == LayerKind::maxpool2d) {
          // Ties go to the lowest flat index: strict comparison keeps the first maximum.
          std::size_t best = (c * h + h0) * w + w0;
          for (std::size_t kh = 0; kh < l.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < l.kernel_w; ++kw) {
              const std::size_t idx = (c * h + h0 + kh) * w + w0 + kw;
              if (in[idx] > in[best]) best = idx;
            }
          }
          grad_in[best] += g;
        } else {
          for (std::size_t kh = 0; kh < l.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < l.kernel_w; ++kw) {
              grad_in[(c * h + h0 + kh) * w + w0 + kw] += g * inv_area;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<LayerKind> layer_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

template <typename T>
Layer<T> Layer<T>::dense(std::size_t in_features, std::size_t out_features) {
  Layer l;
  l.kind = LayerKind::dense;
  l.in = in_features;
  l.out = out_features;
  l.weights = Tensor<T>({out_features, in_features});
  l.bias = Tensor<T>({out_features});
  return l;
}

template <typename T>
Layer<T> Layer<T>::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.in = in_channels;
  l.out = out_channels;
  l.kernel_h = kernel;
  l.kernel_w = kernel;
  l.stride = stride;
  l.padding = padding;
  l.weights = Tensor<T>({out_channels, in_channels, kernel, kernel});
  l.bias = Tensor<T>({out_channels});
  return l;
}

template <typename T>
Layer<T> Layer<T>::relu() {
  Layer l;
  l.kind = LayerKind::relu;
  return l;
}

template <typename T>
Layer<T> Layer<T>::maxpool2d(std::size_t kernel, std::size_t stride) {
  Layer l;
  l.kind = LayerKind::maxpool2d;
  l.kernel_h = kernel;
  l.kernel_w = kernel;
  l.stride = stride;
  return l;
}

template <typename T>
Layer<T> Layer<T>::avgpool2d(std::size_t kernel, std::size_t stride) {
  Layer l = maxpool2d(kernel, stride);
  l.kind = LayerKind::avgpool2d;
  return l;
}

template <typename T>
Layer<T> Layer<T>::flatten() {
  Layer l;
  l.kind = LayerKind::flatten;
  return l;
}

template <typename T>
Layer<T> Layer<T>::logits() {
  Layer l;
  l.kind = LayerKind::logits;
  return l;
}

template <typename T>
kernels::ConvGeometry Layer<T>::conv_geometry(const Shape& input) const {
  kernels::ConvGeometry g;
  g.in_channels = in;
  g.in_h = input.at(1);
  g.in_w = input.at(2);
  g.out_channels = out;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.padding = padding;
  return g;
}

template <typename T>
Shape Layer<T>::output_shape(const Shape& input) const {
  const std::string where = std::string(layer_kind_name(kind)) + " layer: ";
  switch (kind) {
    case LayerKind::dense:
      if (input.size() != 1 || input[0] != in) {
        throw ShapeError(where + "expected input [" + std::to_string(in) + "], got " + shape_str(input));
      }
      if (weights.shape() != Shape{out, in} || bias.shape() != Shape{out}) {
        throw ShapeError(where + "parameter shapes inconsistent with " + std::to_string(in) + "->" +
                         std::to_string(out));
      }
      return {out};
    case LayerKind::conv2d: {
      if (input.size() != 3 || input[0] != in) {
        throw ShapeError(where + "expected input with " + std::to_string(in) + " channels, got " +
                         shape_str(input));
      }
      if (weights.shape() != Shape{out, in, kernel_h, kernel_w} || bias.shape() != Shape{out}) {
        throw ShapeError(where + "parameter shapes inconsistent with declared channels");
      }
      if (stride == 0 || input[1] + 2 * padding < kernel_h || input[2] + 2 * padding < kernel_w) {
        throw ShapeError(where + "kernel does not fit input " + shape_str(input));
      }
      const auto g = conv_geometry(input);
      return {out, g.out_h(), g.out_w()};
    }
    case LayerKind::relu:
      return input;
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      if (input.size() != 3 || stride == 0 || kernel_h == 0 || kernel_w == 0 || input[1] < kernel_h ||
          input[2] < kernel_w) {
        throw ShapeError(where + "window does not fit input " + shape_str(input));
      }
      return {input[0], (input[1] - kernel_h) / stride + 1, (input[2] - kernel_w) / stride + 1};
    case LayerKind::flatten:
      return {shape_size(input)};
    case LayerKind::logits:
      if (input.size() != 1) throw ShapeError(where + "expects a vector, got " + shape_str(input));
      return input;
  }
  throw ShapeError("unknown layer kind");
}

template <typename T>
void layer_forward(const Layer<T>& l, const Tensor<T>& in, Tensor<T>& out, kernels::Exec exec) {
  const bool par = exec == kernels::Exec::parallel;
  switch (l.kind) {
    case LayerKind::dense: {
      const kernels::DenseGeometry g{l.in, l.out};
      if (par) {
        kernels::parallel::dense_forward<T>(g, in.data(), l.weights.data(), l.bias.data(), out.data());
      } else {
        kernels::serial::dense_forward<T>(g, in.data(), l.weights.data(), l.bias.data(), out.data());
      }
      return;
    }
    case LayerKind::conv2d: {
      const auto g = l.conv_geometry(in.shape());
      if (par) {
        kernels::parallel::conv2d_forward<T>(g, in.data(), l.weights.data(), l.bias.data(), out.data());
      } else {
        kernels::serial::conv2d_forward<T>(g, in.data(), l.weights.data(), l.bias.data(), out.data());
      }
      return;
    }
    case LayerKind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      return;
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      pool_forward(l, in, out);
      return;
    case LayerKind::flatten:
    case LayerKind::logits:
      std::copy(in.data().begin(), in.data().end(), out.data().begin());
      return;
  }
}

template <typename T>
Tensor<T> layer_backward(const Layer<T>& l, const Tensor<T>& in, const Tensor<T>& grad_out,
                         LayerGrads<T>* params, kernels::Exec exec) {
  const bool par = exec == kernels::Exec::parallel;
  switch (l.kind) {
    case LayerKind::dense: {
      const kernels::DenseGeometry g{l.in, l.out};
      Tensor<T> grad_in(in.shape());
      if (par) {
        kernels::parallel::dense_backward_input<T>(g, grad_out.data(), l.weights.data(), grad_in.data());
        if (params) {
          kernels::parallel::dense_backward_params<T>(g, in.data(), grad_out.data(), params->weights.data(),
                                                      params->bias.data());
        }
      } else {
        kernels::serial::dense_backward_input<T>(g, grad_out.data(), l.weights.data(), grad_in.data());
        if (params) {
          kernels::serial::dense_backward_params<T>(g, in.data(), grad_out.data(), params->weights.data(),
                                                    params->bias.data());
        }
      }
      return grad_in;
    }
    case LayerKind::conv2d: {
      const auto g = l.conv_geometry(in.shape());
      Tensor<T> grad_in(in.shape());
      if (par) {
        kernels::parallel::conv2d_backward_input<T>(g, grad_out.data(), l.weights.data(), grad_in.data());
        if (params) {
          kernels::parallel::conv2d_backward_params<T>(g, in.data(), grad_out.data(), params->weights.data(),
                                                       params->bias.data());
        }
      } else {
        kernels::serial::conv2d_backward_input<T>(g, grad_out.data(), l.weights.data(), grad_in.data());
        if (params) {
          kernels::serial::conv2d_backward_params<T>(g, in.data(), grad_out.data(), params->weights.data(),
                                                     params->bias.data());
        }
      }
      return grad_in;
    }
    case LayerKind::relu: {
      Tensor<T> grad_in(in.shape());
      // relu'(0) = 0
      for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > T(0) ? grad_out[i] : T(0);
      return grad_in;
    }
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      return pool_backward(l, in, grad_out);
    case LayerKind::flatten:
    case LayerKind::logits:
      return grad_out.reshaped(in.shape());
  }
  throw ShapeError("unknown layer kind");
}

template struct Layer<float>;
template struct Layer<double>;
template void layer_forward<float>(const Layer<float>&, const Tensor<float>&, Tensor<float>&, kernels::Exec);
template void layer_forward<double>(const Layer<double>&, const Tensor<double>&, Tensor<double>&,
                                    kernels::Exec);
template Tensor<float> layer_backward<float>(const Layer<float>&, const Tensor<float>&, const Tensor<float>&,
                                             LayerGrads<float>*, kernels::Exec);
template Tensor<double> layer_backward<double>(const Layer<double>&, const Tensor<double>&,
                                               const Tensor<double>&, LayerGrads<double>*, kernels::Exec);

}  // namespace naa
