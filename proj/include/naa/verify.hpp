#pragma once

// Oracle suites behind `naa verify`: finite-difference gradients, attribution
// completeness and layer independence, factorization exactness, and the
// frozen attribution fixture.

#include <cstdint>
#include <string>
#include <vector>

#include "naa/attribution.hpp"
#include "naa/rng.hpp"

namespace naa::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// He-normal weights and N(0, bias_scale^2) biases for every parameter layer.
template <typename T>
void randomize(Network<T>& model, std::uint64_t seed, double bias_scale);

/// dense/relu stack over `widths` (input, hidden..., classes) ending in a
/// logits marker; every non-final layer is a tap.
Network<double> relu_mlp(const std::vector<std::size_t>& widths, std::uint64_t seed, double bias_scale);

/// Bias-free relu layers up to tap 3, then two dense layers with biases and
/// no nonlinearity. With a black baseline every tap activation scales
/// linearly along the path and the gradient above the tap is constant.
Network<double> linear_above_tap(std::uint64_t seed);
inline constexpr std::size_t kLinearAboveTap = 3;

/// Small network exercising `kind`, shaped by `rng`.
Network<double> layer_probe(LayerKind kind, Rng& rng);

/// Uniform [0,1) tensor.
Tensor<double> random_unit(const Shape& shape, Rng& rng);

/// True when a relu input or a maxpool runner-up lies within `margin` of a
/// kink, where a central difference of step h would be meaningless.
bool near_kink(const Network<double>& model, const Tensor<double>& x, double margin);

/// ||g_fd - g||_2 / max(||g||_2, 1e-12) for d logit[c] / dx with central
/// differences of step h.
double input_gradient_error(const Network<double>& model, const Tensor<double>& x, std::size_t c, double h);

CheckResult check_gradients(std::size_t cases_per_kind, std::uint64_t seed);
CheckResult check_completeness_convergence(std::size_t cases, std::uint64_t seed);
CheckResult check_layer_independence(std::size_t cases, std::uint64_t seed);
CheckResult check_factorization_exactness(std::size_t cases, std::uint64_t seed);

/// Fixture: a seeded 16-hidden-unit MLP with exact attributions frozen at n=200.
struct Fixture {
  Network<double> model;
  Tensor<double> input;
  std::size_t tap = 0;
  std::size_t output_index = 0;
  std::size_t steps = 0;
  std::vector<double> values;
  double total = 0.0;
  double residual = 0.0;
};

Fixture make_fixture(std::uint64_t seed);
void write_fixture(const Fixture& f, const std::string& dir);
Fixture read_fixture(const std::string& dir);

CheckResult check_fixture(const std::string& dir);
/// f32 engine against f64 on the fixture model: logits and IA within 1e-4 relative.
CheckResult check_precision_agreement(const std::string& dir);

/// Every suite above; the f32 agreement check runs only for precision "f32".
std::vector<CheckResult> run_all(const std::string& fixture_dir, const std::string& precision, std::uint64_t seed);

}  // namespace naa::verify
