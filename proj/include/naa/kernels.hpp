#pragma once

// Compute kernels for the two parameterized layer kinds.
//
// Every kernel exists twice: `serial` is a direct transcription of the
// defining sums and is kept as the reference the tests and the benchmark
// compare against; `parallel` is loop-reordered for contiguous inner loops and
// splits work across OpenMP threads so that each output element is owned by
// exactly one thread. Results of `parallel` are therefore bitwise-independent
// of the thread count. The two variants use different summation orders and
// agree only to rounding.
//
// Layouts: images are [C,H,W], conv weights [O,C,KH,KW], dense weights [O,I].
// Forward and backward_input overwrite their output; backward_params
// accumulates into the gradient buffers.

#include <cstddef>
#include <span>

namespace naa::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const { return (in_h + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * padding - kernel_w) / stride + 1; }
};

struct DenseGeometry {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

enum class Exec { serial, parallel };

namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in);
template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_weight,
                            std::span<T> grad_bias);

template <typename T>
void dense_forward(const DenseGeometry& g, std::span<const T> in, std::span<const T> weight,
                   std::span<const T> bias, std::span<T> out);
template <typename T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> grad_out,
                          std::span<const T> weight, std::span<T> grad_in);
template <typename T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> in,
                           std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias);

}  // namespace serial

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in);
template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_weight,
                            std::span<T> grad_bias);

template <typename T>
void dense_forward(const DenseGeometry& g, std::span<const T> in, std::span<const T> weight,
                   std::span<const T> bias, std::span<T> out);
template <typename T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> grad_out,
                          std::span<const T> weight, std::span<T> grad_in);
template <typename T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> in,
                           std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias);

}  // namespace parallel

}  // namespace naa::kernels
