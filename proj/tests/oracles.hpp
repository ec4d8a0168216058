#pragma once

// Reference computations used by the tests. They only call forward passes
// (never the engine's reverse mode), so they check gradients and
// attributions independently of the code under test.

#include <cmath>
#include <vector>

#include "naa/network.hpp"

namespace oracle {

using naa::Network;
using naa::Tensor;

inline double logit(const Network<double>& m, const Tensor<double>& x, std::size_t c) {
  return m.forward(x, naa::Exec::serial).logits[c];
}

/// Central differences of logit[c] with respect to every input element.
inline std::vector<double> input_gradient(const Network<double>& m, const Tensor<double>& x, std::size_t c,
                                          double h = 1e-5) {
  std::vector<double> g(x.size());
  Tensor<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = logit(m, xp, c);
    xp[i] = x[i] - h;
    const double down = logit(m, xp, c);
    xp[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Central differences of s(x) = <w, acts[act](x)>; the vector-Jacobian
/// product of the sub-network below `act` with w.
inline std::vector<double> vjp(const Network<double>& m, const Tensor<double>& x, std::size_t act,
                               const Tensor<double>& w, double h = 1e-5) {
  const auto s = [&](const Tensor<double>& p) {
    const Tensor<double> y = m.trace(p, act, naa::Exec::serial).acts[act];
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) acc += w[j] * y[j];
    return acc;
  };
  std::vector<double> g(x.size());
  Tensor<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = s(xp);
    xp[i] = x[i] - h;
    const double down = s(xp);
    xp[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// The layers above `tap` as a network of their own.
inline Network<double> suffix(const Network<double>& m, std::size_t tap) {
  std::vector<naa::Layer<double>> layers(m.layers().begin() + static_cast<std::ptrdiff_t>(tap + 1), m.layers().end());
  return Network<double>(m.activation_shape(tap), std::move(layers), m.class_count());
}

/// Per-neuron path attribution by differences only: dF/dy_j by perturbing the tap activation and
/// running the layers above it, and <x - x', grad y_j> as the directional
/// difference of the tap activation along x - x'.
inline std::vector<double> attribution(const Network<double>& m, const Tensor<double>& x,
                                       const Tensor<double>& baseline, std::size_t tap, std::size_t c,
                                       std::size_t n, double h = 1e-6) {
  const Network<double> above = suffix(m, tap);
  Tensor<double> dir(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dir[i] = x[i] - baseline[i];
  std::vector<double> acc(naa::shape_size(m.activation_shape(tap)), 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double a = static_cast<double>(k) / static_cast<double>(n);
    Tensor<double> xm(x.shape()), up(x.shape()), down(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xm[i] = baseline[i] + a * dir[i];
      up[i] = xm[i] + h * dir[i];
      down[i] = xm[i] - h * dir[i];
    }
    Tensor<double> y = m.trace(xm, tap + 1, naa::Exec::serial).acts[tap + 1];
    const Tensor<double> yu = m.trace(up, tap + 1, naa::Exec::serial).acts[tap + 1];
    const Tensor<double> yd = m.trace(down, tap + 1, naa::Exec::serial).acts[tap + 1];
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double keep = y[j];
      y[j] = keep + h;
      const double fu = logit(above, y, c);
      y[j] = keep - h;
      const double fd = logit(above, y, c);
      y[j] = keep;
      acc[j] += (fu - fd) / (2 * h) * (yu[j] - yd[j]) / (2 * h);
    }
  }
  for (double& v : acc) v /= static_cast<double>(n);
  return acc;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace oracle
