#include <gtest/gtest.h>

#include "naa/verify.hpp"
#include "oracles.hpp"

using namespace naa;

namespace {

const LayerKind kProbeKinds[] = {LayerKind::dense, LayerKind::conv2d, LayerKind::relu,
                                 LayerKind::maxpool2d, LayerKind::avgpool2d, LayerKind::flatten};

Network<double> small_cnn(std::uint64_t seed) {
  std::vector<Layer<double>> layers{Layer<double>::conv2d(2, 3, 3, 1, 1), Layer<double>::relu(),
                                    Layer<double>::maxpool2d(2, 2),       Layer<double>::flatten(),
                                    Layer<double>::dense(3 * 3 * 3, 4),   Layer<double>::logits()};
  Network<double> m({2, 6, 6}, std::move(layers), 4, {1, 2, 3});
  verify::randomize(m, seed, 0.1);
  return m;
}

}  // namespace

TEST(Network, InputGradientMatchesFiniteDifferencesPerLayerKind) {
  Rng rng(5);
  for (LayerKind kind : kProbeKinds) {
    int checked = 0;
    for (int attempt = 0; attempt < 40 && checked < 10; ++attempt) {
      const Network<double> m = verify::layer_probe(kind, rng);
      const Tensor<double> x = verify::random_unit(m.input_shape(), rng);
      if (verify::near_kink(m, x, 1e-3)) continue;
      const std::size_t c = rng.below(m.class_count());
      const auto fd = oracle::input_gradient(m, x, c);
      const auto g = m.backward(x, c).grad_wrt_input;
      EXPECT_LT(oracle::rel_l2(std::vector<double>(g.values()), fd), 1e-5) << layer_kind_name(kind);
      ++checked;
    }
    EXPECT_EQ(checked, 10) << layer_kind_name(kind);
  }
}

TEST(Network, TapGradientPullsBackLikeTheSubNetworkBelow) {
  // For every tap, pulling a random cotangent w from the tap down to the
  // input must equal the derivative of <w, y_tap(x)>.
  const Network<double> m = small_cnn(1);
  Rng rng(2);
  const Tensor<double> x = verify::random_unit(m.input_shape(), rng);
  ASSERT_FALSE(verify::near_kink(m, x, 1e-4));
  const Trace<double> tr = m.trace(x);
  for (std::size_t tap : m.taps()) {
    Tensor<double> w(m.activation_shape(tap));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform(-1, 1);
    const Tensor<double> g = m.pullback(tr, tap + 1, w, 0);
    EXPECT_LT(oracle::rel_l2(std::vector<double>(g.values()), oracle::vjp(m, x, tap + 1, w)), 1e-6) << tap;
  }
}

TEST(Network, TapGradientsChainToInputGradient) {
  const Network<double> m = small_cnn(4);
  Rng rng(8);
  const Tensor<double> x = verify::random_unit(m.input_shape(), rng);
  const auto bundle = m.backward(x, 2);
  const Trace<double> tr = m.trace(x);
  for (std::size_t tap : m.taps()) {
    const Tensor<double> down = m.pullback(tr, tap + 1, bundle.grad_wrt_tap.at(tap), 0);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(down[i], bundle.grad_wrt_input[i], 1e-12);
  }
  EXPECT_DOUBLE_EQ(bundle.logit_value, m.forward(x).logits[2]);
}

TEST(Network, ForwardIsDeterministicAndSerialAgrees) {
  const Network<double> m = small_cnn(3);
  Rng rng(4);
  const Tensor<double> x = verify::random_unit(m.input_shape(), rng);
  const auto a = m.forward(x), b = m.forward(x);
  EXPECT_EQ(a.logits, b.logits);
  const auto s = m.forward(x, Exec::serial);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.logits[i], s.logits[i], 1e-12);
  EXPECT_EQ(a.tap_activations.size(), 3u);
}

TEST(Network, ReluDerivativeAtZeroIsZero) {
  Network<double> m({2}, {Layer<double>::relu(), Layer<double>::logits()}, 2);
  const Tensor<double> x({2}, {0.0, 1.0});
  const auto g = m.backward(x, 0).grad_wrt_input;
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(m.backward(x, 1).grad_wrt_input[1], 1.0);
}

TEST(Network, MaxpoolTieRoutesGradientToLowestIndex) {
  Network<double> m({1, 2, 2}, {Layer<double>::maxpool2d(2, 2), Layer<double>::flatten(), Layer<double>::logits()}, 1);
  const Tensor<double> x({1, 2, 2}, {0.5, 0.5, 0.5, 0.2});
  const auto g = m.backward(x, 0).grad_wrt_input;
  EXPECT_EQ(g.values(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Network, RejectsBadShapesAndTaps) {
  EXPECT_THROW(Network<double>({4}, {Layer<double>::dense(3, 2), Layer<double>::logits()}, 2), ShapeError);
  EXPECT_THROW(Network<double>({4}, {Layer<double>::dense(4, 3), Layer<double>::logits()}, 2), ShapeError);
  EXPECT_THROW(Network<double>({4}, {Layer<double>::dense(4, 2), Layer<double>::logits()}, 2, {5}), Error);
  const Network<double> m({4}, {Layer<double>::dense(4, 2), Layer<double>::logits()}, 2);
  EXPECT_THROW(m.forward(Tensor<double>({5})), ShapeError);
  EXPECT_THROW(m.backward(Tensor<double>({4}), 2), Error);
}

TEST(Network, CastRoundTripKeepsStructure) {
  const Network<double> m = small_cnn(6);
  const Network<float> f = m.cast<float>();
  EXPECT_EQ(f.taps(), m.taps());
  EXPECT_EQ(f.layer_count(), m.layer_count());
  EXPECT_EQ(f.param_count(), m.param_count());
}
