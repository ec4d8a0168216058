#include <gtest/gtest.h>

#include <json.hpp>

#include "naa/attribution.hpp"
#include "naa/verify.hpp"
#include "oracles.hpp"

using namespace naa;

namespace {

/// F = w·x with a flatten tap that reads the input itself.
Network<double> linear_model(const std::vector<double>& w) {
  Layer<double> d = Layer<double>::dense(w.size(), 1);
  d.weights = Tensor<double>({1, w.size()}, w);
  d.bias = Tensor<double>({1}, {0.3});
  return Network<double>({w.size()}, {Layer<double>::flatten(), d, Layer<double>::logits()}, 1, {0});
}

}  // namespace

TEST(Attribution, LinearModelGivesWeightTimesInput) {
  const std::vector<double> w{0.5, -1.0, 2.0, 0.0};
  const Network<double> m = linear_model(w);
  const Tensor<double> x({4}, {0.2, 0.4, 0.6, 0.8});
  const auto path = PathSpec<double>::black({4}, 7);
  const auto exact = exact_neuron_attribution(m, x, path, 0, 0);
  const auto fact = factorized_attribution(m, x, path, 0, 0);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(exact.values[j], w[j] * x[j], 1e-15);
    EXPECT_NEAR(fact.values[j], w[j] * x[j], 1e-15);
  }
  EXPECT_NEAR(fact.total, 0.1 - 0.4 + 1.2, 1e-15);
}

TEST(Attribution, IntegratedAttentionOnLinearNetIsStepIndependent) {
  const Network<double> m = linear_model({0.5, -1.0, 2.0});
  const Tensor<double> x({3}, {0.1, 0.9, 0.5});
  const auto one = integrated_attention(m, x, PathSpec<double>::black({3}, 1), 0, 0);
  const auto hundred = integrated_attention(m, x, PathSpec<double>::black({3}, 100), 0, 0);
  EXPECT_EQ(one.backward_passes, 1u);
  EXPECT_EQ(hundred.backward_passes, 100u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(one.values[j], hundred.values[j], 1e-14);
}

TEST(Attribution, RejectsZeroStepsAndBadTaps) {
  const Network<double> m = verify::relu_mlp({4, 5, 3}, 1, 0.1);
  const Tensor<double> x({4}, {0.1, 0.2, 0.3, 0.4});
  EXPECT_THROW(integrated_attention(m, x, PathSpec<double>::black({4}, 0), 0, 0), ValueError);
  EXPECT_THROW(integrated_attention(m, x, PathSpec<double>::black({4}, 3), 7, 0), ValueError);
  EXPECT_THROW(integrated_attention(m, x, PathSpec<double>::black({4}, 3), 0, 3), ValueError);
  EXPECT_THROW(integrated_attention(m, x, PathSpec<double>{Tensor<double>({5}), 3}, 0, 0), ShapeError);
}

TEST(Attribution, InputEqualToBaselineGivesZero) {
  const Network<double> m = verify::relu_mlp({6, 5, 3}, 2, 0.1);
  Rng rng(1);
  const Tensor<double> x = verify::random_unit({6}, rng);
  const PathSpec<double> path{x, 10};
  const auto exact = exact_neuron_attribution(m, x, path, 1, 0);
  const auto fact = factorized_attribution(m, x, path, 1, 0);
  for (double v : exact.values.data()) EXPECT_EQ(v, 0.0);
  for (double v : fact.values.data()) EXPECT_EQ(v, 0.0);
}

TEST(Attribution, ExactOracleMatchesDifferenceOracle) {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network<double> m = verify::relu_mlp({8, 7, 6, 3}, seed, 0.1);
    const Tensor<double> x = verify::random_unit({8}, rng);
    const auto path = PathSpec<double>::black({8}, 12);
    for (std::size_t tap : {0u, 1u, 2u, 3u}) {
      const auto exact = exact_neuron_attribution(m, x, path, tap, 1);
      const auto ref = oracle::attribution(m, x, path.baseline, tap, 1, 12);
      EXPECT_LT(oracle::rel_l2(std::vector<double>(exact.values.values()), ref), 1e-5)
          << "seed " << seed << " tap " << tap;
    }
  }
}

TEST(Attribution, ExactOracleRefusesLargeTaps) {
  const Network<double> m = verify::relu_mlp({4, 20, 3}, 1, 0.1);
  const Tensor<double> x({4}, {0.1, 0.2, 0.3, 0.4});
  try {
    exact_neuron_attribution(m, x, PathSpec<double>::black({4}, 3), 0, 0, 10);
    FAIL();
  } catch (const ValueError& e) {
    EXPECT_NE(std::string(e.what()).find("20 neurons"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("cap of 10"), std::string::npos);
  }
}

TEST(Attribution, CompletenessReportIsLayerIndependentWhenQuadratureIsExact) {
  const Network<double> m = verify::linear_above_tap(4);
  Rng rng(4);
  const Tensor<double> x = verify::random_unit(m.input_shape(), rng);
  const auto recs = completeness_report(m, x, PathSpec<double>::black(m.input_shape(), 20), {1, 3}, 2);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_NEAR(recs[0].total, recs[1].total, 1e-12);
  EXPECT_DOUBLE_EQ(recs[0].f_input, oracle::logit(m, x, 2));
}

TEST(Attribution, JsonRecordHasTheFixedKeys) {
  AttributionField<double> f;
  f.tap = 2;
  f.steps = 30;
  f.method = AttributionMethod::exact_oracle;
  f.values = Tensor<double>({2}, {0.25, -1.0});
  f.total = -0.75;
  const auto j = nlohmann::json::parse(attribution_to_json(f, 1e-3));
  EXPECT_EQ(j.at("tap"), 2);
  EXPECT_EQ(j.at("n"), 30);
  EXPECT_EQ(j.at("method"), "exact-oracle");
  EXPECT_EQ(j.at("values"), nlohmann::json::array({0.25, -1.0}));
  EXPECT_EQ(j.at("total"), -0.75);
  EXPECT_EQ(j.at("residual"), 1e-3);
}

TEST(Attribution, PearsonBasics) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1};
  EXPECT_NEAR(pearson<double>(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson<double>(a, c), -1.0, 1e-15);
  EXPECT_THROW(pearson<double>(a, std::vector<double>{1}), ShapeError);
}
