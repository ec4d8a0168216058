#include <algorithm>
#include <cstddef>

#include "naa/kernels.hpp"

namespace naa::kernels::parallel {
namespace {

// Output columns [lo, hi) whose input column ow*stride + kw - padding lies in [0, in_w).
struct ColumnRange {
  std::size_t lo;
  std::size_t hi;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kw) {
  const std::size_t ow_n = g.out_w();
  std::size_t lo = 0;
  if (g.padding > kw) lo = (g.padding - kw + g.stride - 1) / g.stride;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(g.in_w) - 1 +
                              static_cast<std::ptrdiff_t>(g.padding) -
                              static_cast<std::ptrdiff_t>(kw);
  if (last < 0) return {0, 0};
  const std::size_t hi = std::min(ow_n, static_cast<std::size_t>(last) / g.stride + 1);
  return {lo, std::max(lo, hi)};
}

// Input row for output row oh and kernel row kh, or -1 when in padding.
std::ptrdiff_t input_row(const ConvGeometry& g, std::size_t oh, std::size_t kh) {
  const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) return -1;
  return ih;
}

// Flat offset of the input element read by output column `lo` of the valid range.
std::size_t row_base(const ConvGeometry& g, std::ptrdiff_t ih, std::size_t kw) {
  const ColumnRange cols = valid_columns(g, kw);
  return static_cast<std::size_t>(ih) * g.in_w + cols.lo * g.stride + kw - g.padding;
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const std::size_t plane = oh_n * ow_n;
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oi = 0; oi < channels; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    T* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, bias[o]);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const T* src = in.data() + c * g.in_h * g.in_w;
      for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
          const T w = weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw];
          const ColumnRange cols = valid_columns(g, kw);
          for (std::size_t oh = 0; oh < oh_n; ++oh) {
            const std::ptrdiff_t ih = input_row(g, oh, kh);
            if (ih < 0) continue;
            T* drow = dst + oh * ow_n;
            const T* srow = src + row_base(g, ih, kw);
            if (g.stride == 1) {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) drow[ow] += w * srow[ow - cols.lo];
            } else {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) drow[ow] += w * srow[(ow - cols.lo) * g.stride];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const std::size_t plane = oh_n * ow_n;
  const auto channels = static_cast<std::ptrdiff_t>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < channels; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    T* dst = grad_in.data() + c * g.in_h * g.in_w;
    std::fill(dst, dst + g.in_h * g.in_w, T(0));
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const T* src = grad_out.data() + o * plane;
      for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
          const T w = weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw];
          const ColumnRange cols = valid_columns(g, kw);
          for (std::size_t oh = 0; oh < oh_n; ++oh) {
            const std::ptrdiff_t ih = input_row(g, oh, kh);
            if (ih < 0) continue;
            const T* srow = src + oh * ow_n;
            T* drow = dst + row_base(g, ih, kw);
            if (g.stride == 1) {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) drow[ow - cols.lo] += w * srow[ow];
            } else {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) drow[(ow - cols.lo) * g.stride] += w * srow[ow];
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
  const std::size_t plane = oh_n * ow_n;
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oi = 0; oi < channels; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    const T* go = grad_out.data() + o * plane;
    T bsum = T(0);
    for (std::size_t k = 0; k < plane; ++k) bsum += go[k];
    grad_bias[o] += bsum;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const T* src = in.data() + c * g.in_h * g.in_w;
      for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
          const ColumnRange cols = valid_columns(g, kw);
          T acc = T(0);
          for (std::size_t oh = 0; oh < oh_n; ++oh) {
            const std::ptrdiff_t ih = input_row(g, oh, kh);
            if (ih < 0) continue;
            const T* grow = go + oh * ow_n;
            const T* srow = src + row_base(g, ih, kw);
            for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) acc += grow[ow] * srow[(ow - cols.lo) * g.stride];
          }
          grad_weight[((o * g.in_channels + c) * g.kernel_h + kh) * g.kernel_w + kw] += acc;
        }
      }
    }
  }
}

template <typename T>
void dense_forward(const DenseGeometry& g, std::span<const T> in, std::span<const T> weight,
                   std::span<const T> bias, std::span<T> out) {
  const auto outs = static_cast<std::ptrdiff_t>(g.out_features);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oi = 0; oi < outs; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    const T* row = weight.data() + o * g.in_features;
    T acc = T(0);
    for (std::size_t i = 0; i < g.in_features; ++i) acc += row[i] * in[i];
    out[o] = bias[o] + acc;
  }
}

template <typename T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> grad_out,
                          std::span<const T> weight, std::span<T> grad_in) {
  constexpr std::size_t kChunk = 256;
  const auto chunks = static_cast<std::ptrdiff_t>((g.in_features + kChunk - 1) / kChunk);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ki = 0; ki < chunks; ++ki) {
    const std::size_t lo = static_cast<std::size_t>(ki) * kChunk;
    const std::size_t hi = std::min(g.in_features, lo + kChunk);
    T* dst = grad_in.data();
    std::fill(dst + lo, dst + hi, T(0));
    for (std::size_t o = 0; o < g.out_features; ++o) {
      const T go = grad_out[o];
      const T* row = weight.data() + o * g.in_features;
      for (std::size_t i = lo; i < hi; ++i) dst[i] += go * row[i];
    }
  }
}

template <typename T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> in,
                           std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias) {
  const auto outs = static_cast<std::ptrdiff_t>(g.out_features);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oi = 0; oi < outs; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    const T go = grad_out[o];
    grad_bias[o] += go;
    T* row = grad_weight.data() + o * g.in_features;
    for (std::size_t i = 0; i < g.in_features; ++i) row[i] += go * in[i];
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

}  // namespace naa::kernels::parallel
