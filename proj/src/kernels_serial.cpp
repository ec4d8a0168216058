#include "naa/kernels.hpp"

#include <algorithm>

namespace naa::kernels::serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        T acc = bias[o];
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                              static_cast<std::ptrdiff_t>(g.padding);
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                              static_cast<std::ptrdiff_t>(g.padding);
              if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
                  iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
                continue;
              }
              acc += weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw] *
                     in[(c * g.in_h + ih) * g.in_w + iw];
            }
          }
        }
        out[(o * oh_n + oh) * ow_n + ow] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), T(0));
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const T go = grad_out[(o * oh_n + oh) * ow_n + ow];
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                              static_cast<std::ptrdiff_t>(g.padding);
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                              static_cast<std::ptrdiff_t>(g.padding);
              if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
                  iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
                continue;
              }
              grad_in[(c * g.in_h + ih) * g.in_w + iw] +=
                  go * weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_weight,
                            std::span<T> grad_bias) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const T go = grad_out[(o * oh_n + oh) * ow_n + ow];
        grad_bias[o] += go;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                              static_cast<std::ptrdiff_t>(g.padding);
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                              static_cast<std::ptrdiff_t>(g.padding);
              if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
                  iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
                continue;
              }
              grad_weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw] +=
                  go * in[(c * g.in_h + ih) * g.in_w + iw];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void dense_forward(const DenseGeometry& g, std::span<const T> in, std::span<const T> weight,
                   std::span<const T> bias, std::span<T> out) {
  for (std::size_t o = 0; o < g.out_features; ++o) {
    T acc = bias[o];
    for (std::size_t i = 0; i < g.in_features; ++i) acc += weight[o * g.in_features + i] * in[i];
    out[o] = acc;
  }
}

template <typename T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> grad_out,
                          std::span<const T> weight, std::span<T> grad_in) {
  for (std::size_t i = 0; i < g.in_features; ++i) {
    T acc = T(0);
    for (std::size_t o = 0; o < g.out_features; ++o) acc += weight[o * g.in_features + i] * grad_out[o];
    grad_in[i] = acc;
  }
}

template <typename T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> in,
                           std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias) {
  for (std::size_t o = 0; o < g.out_features; ++o) {
    grad_bias[o] += grad_out[o];
    for (std::size_t i = 0; i < g.in_features; ++i) grad_weight[o * g.in_features + i] += grad_out[o] * in[i];
  }
}

#define NAA_INSTANTIATE(T)                                                                         \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,    \
                                  std::span<const T>, std::span<T>);                              \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,                 \
                                         std::span<const T>, std::span<T>);                       \
  template void conv2d_backward_params<T>(const ConvGeometry&, std::span<const T>,                \
                                          std::span<const T>, std::span<T>, std::span<T>);        \
  template void dense_forward<T>(const DenseGeometry&, std::span<const T>, std::span<const T>,    \
                                 std::span<const T>, std::span<T>);                               \
  template void dense_backward_input<T>(const DenseGeometry&, std::span<const T>,                 \
                                        std::span<const T>, std::span<T>);                        \
  template void dense_backward_params<T>(const DenseGeometry&, std::span<const T>,                \
                                         std::span<const T>, std::span<T>, std::span<T>);

NAA_INSTANTIATE(float)
NAA_INSTANTIATE(double)
#undef NAA_INSTANTIATE

}  // namespace naa::kernels::serial
