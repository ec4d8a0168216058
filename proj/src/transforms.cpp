#include "naa/transforms.hpp"

#include <array>
#include <cmath>

namespace naa {
namespace {

constexpr std::array<std::string_view, 5> kTransformNames{"linear", "log", "sqrt", "square", "exp"};

std::size_t scaled_extent(double fraction, std::size_t extent) {
  return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(extent)));
}

// Nearest-neighbour source coordinate when resizing `from` samples to `to`.
std::size_t nearest(std::size_t i, std::size_t from, std::size_t to) { return i * from / to; }

template <typename T>
T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace

std::string_view TransformFn::name() const { return kTransformNames[static_cast<std::size_t>(kind)]; }

std::optional<TransformFn> TransformFn::parse(std::string_view name) {
  for (std::size_t i = 0; i < kTransformNames.size(); ++i) {
    if (kTransformNames[i] == name) return TransformFn{static_cast<TransformKind>(i)};
  }
  return std::nullopt;
}

const std::vector<TransformFn>& TransformFn::all() {
  static const std::vector<TransformFn> fns{{TransformKind::linear}, {TransformKind::log}, {TransformKind::sqrt},
                                            {TransformKind::square}, {TransformKind::exp}};
  return fns;
}

DiverseInput sample_dim(const Shape& shape, const DimParams& params, Rng& rng) {
  if (shape.size() != 3) throw ShapeError("diverse input expects [C,H,W], got " + shape_str(shape));
  if (!(params.probability >= 0.0 && params.probability <= 1.0)) {
    throw ConfigError("dim probability must lie in [0,1]");
  }
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  const std::size_t side = std::max(h, w);
  const std::size_t low = scaled_extent(params.resize_low, side);
  const std::size_t high = scaled_extent(params.resize_high, side);
  if (!(params.resize_low > 0.0) || low == 0 || high < low || params.resize_high > 2.0) {
    throw ConfigError("dim resize bounds must satisfy 0 < low <= high <= 2 (fractions of the image side)");
  }
  DiverseInput d;
  d.shape = shape;
  if (!rng.bernoulli(params.probability)) return d;

  const auto r = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(low), static_cast<std::int64_t>(high)));
  const std::size_t canvas = std::max(high, side);
  const auto top = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(canvas - r)));
  const auto left = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(canvas - r)));

  d.source.assign(c * h * w, -1);
  for (std::size_t oh = 0; oh < h; ++oh) {
    const std::size_t ch = nearest(oh, canvas, h);
    if (ch < top || ch >= top + r) continue;
    const std::size_t ih = nearest(ch - top, h, r);
    for (std::size_t ow = 0; ow < w; ++ow) {
      const std::size_t cw = nearest(ow, canvas, w);
      if (cw < left || cw >= left + r) continue;
      const std::size_t iw = nearest(cw - left, w, r);
      for (std::size_t k = 0; k < c; ++k) {
        d.source[(k * h + oh) * w + ow] = static_cast<std::int64_t>((k * h + ih) * w + iw);
      }
    }
  }
  return d;
}

template <typename T>
Tensor<T> project_uniform(const Tensor<T>& cut, std::size_t kernel) {
  if (kernel % 2 == 0) throw ConfigError("projection kernel size must be odd, got " + std::to_string(kernel));
  if (cut.rank() != 3) throw ShapeError("projection expects [C,H,W], got " + shape_str(cut.shape()));
  const std::size_t c = cut.shape()[0], h = cut.shape()[1], w = cut.shape()[2];
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const T weight = T(1) / static_cast<T>(kernel * kernel);
  const auto clamp = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  Tensor<T> out(cut.shape());
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const T v = cut[(k * h + i) * w + j];
        if (v == T(0)) continue;
        const T share = v * weight;
        for (std::ptrdiff_t di = -half; di <= half; ++di) {
          const std::size_t ti = clamp(static_cast<std::ptrdiff_t>(i) + di, h);
          for (std::ptrdiff_t dj = -half; dj <= half; ++dj) {
            out[(k * h + ti) * w + clamp(static_cast<std::ptrdiff_t>(j) + dj, w)] += share;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> pim_step(const Tensor<T>& direction, double alpha, const PimParams& params, double epsilon,
                   Tensor<T>& amplification) {
  if (amplification.shape() != direction.shape()) amplification = Tensor<T>(direction.shape());
  const T ab = static_cast<T>(params.amplification * alpha);
  const T eps = static_cast<T>(epsilon);
  Tensor<T> cut(direction.shape());
  for (std::size_t i = 0; i < direction.size(); ++i) {
    amplification[i] += ab * direction[i];
    const T a = amplification[i];
    cut[i] = std::max(std::abs(a) - eps, T(0)) * sign_of(a);
  }
  const Tensor<T> spread = project_uniform(cut, params.kernel);
  Tensor<T> inc(direction.shape());
  for (std::size_t i = 0; i < direction.size(); ++i) {
    const T p = ab * sign_of(spread[i]);
    amplification[i] += p;
    inc[i] = ab * direction[i] + p;
  }
  return inc;
}

template Tensor<float> project_uniform<float>(const Tensor<float>&, std::size_t);
template Tensor<double> project_uniform<double>(const Tensor<double>&, std::size_t);
template Tensor<float> pim_step<float>(const Tensor<float>&, double, const PimParams&, double, Tensor<float>&);
template Tensor<double> pim_step<double>(const Tensor<double>&, double, const PimParams&, double, Tensor<double>&);

}  // namespace naa
