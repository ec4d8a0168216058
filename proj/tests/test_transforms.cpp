#include <gtest/gtest.h>

#include "naa/transforms.hpp"

using namespace naa;

namespace {

Tensor<double> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double dot_all(const Tensor<double>& a, const Tensor<double>& b) { return dot<double>(a.data(), b.data()); }

}  // namespace

TEST(TransformFn, ValuesAndDerivatives) {
  const auto get = [](const char* n) { return *TransformFn::parse(n); };
  EXPECT_DOUBLE_EQ(get("log").apply(1.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(get("log").derivative(1.0), 0.5);
  EXPECT_DOUBLE_EQ(get("sqrt").apply(4.0), 2.0);
  EXPECT_DOUBLE_EQ(get("sqrt").derivative(4.0), 0.25);
  EXPECT_EQ(get("sqrt").derivative(0.0), 0.0);
  EXPECT_DOUBLE_EQ(get("square").derivative(3.0), 6.0);
  EXPECT_DOUBLE_EQ(get("exp").derivative(0.0), 1.0);
  EXPECT_FALSE(TransformFn::parse("cube").has_value());
  EXPECT_EQ(TransformFn::all().size(), 5u);
  for (const TransformFn& f : TransformFn::all()) EXPECT_EQ(TransformFn::parse(f.name()), f);
}

TEST(Dim, ProbabilityZeroIsIdentity) {
  Rng rng(1);
  DimParams p{true, 0.0, 1.0, 1.1};
  const Tensor<double> x = random_tensor({3, 32, 32}, rng, 0, 1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(dim_transform(x, p, rng), x);
}

TEST(Dim, ProbabilityOneIsSeedDeterministicAndChangesTheImage) {
  Rng data(2);
  const Tensor<double> x = random_tensor({3, 32, 32}, data, 0, 1);
  DimParams p{true, 1.0, 1.0, 1.1};
  Rng a(5), b(5);
  std::size_t changed = 0;
  for (int i = 0; i < 20; ++i) {
    const auto ta = dim_transform(x, p, a);
    EXPECT_EQ(ta, dim_transform(x, p, b));
    EXPECT_EQ(ta.shape(), x.shape());
    changed += ta != x;
  }
  EXPECT_GT(changed, 0u);
}

TEST(Dim, AdjointSatisfiesTheDotProductIdentity) {
  Rng rng(3);
  DimParams p{true, 1.0, 0.8, 1.3};
  for (int i = 0; i < 20; ++i) {
    const DiverseInput t = sample_dim({2, 16, 16}, p, rng);
    const auto x = random_tensor({2, 16, 16}, rng), y = random_tensor({2, 16, 16}, rng);
    EXPECT_NEAR(dot_all(t.apply(x), y), dot_all(x, t.adjoint(y)), 1e-12);
  }
}

TEST(Dim, RejectsBadBounds) {
  Rng rng(0);
  EXPECT_THROW(sample_dim({1, 8, 8}, DimParams{true, 1.0, 1.2, 1.1}, rng), Error);
  EXPECT_THROW(sample_dim({1, 8, 8}, DimParams{true, 1.0, 0.0, 1.1}, rng), Error);
  EXPECT_THROW(sample_dim({1, 8, 8}, DimParams{true, 1.0, 1.0, 3.0}, rng), Error);
}

TEST(Pim, ProjectionConservesMassPerChannel) {
  Rng rng(4);
  const auto c = random_tensor({3, 7, 9}, rng);
  for (std::size_t k : {1u, 3u, 5u}) {
    const auto p = project_uniform(c, k);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < 63; ++i) {
        a += c[ch * 63 + i];
        b += p[ch * 63 + i];
      }
      EXPECT_NEAR(a, b, 1e-12);
    }
  }
  EXPECT_THROW(project_uniform(c, 4), Error);
}

TEST(Pim, UnitAmplificationWithoutOverflowIsAPlainSignStep) {
  Rng rng(6);
  Tensor<double> d({2, 5, 5});
  for (double& v : d.data()) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  Tensor<double> amp({2, 5, 5});
  const double alpha = 0.01, eps = 16.0 / 255.0;
  // beta = 1 and |a| stays below eps, so nothing is cut and projected.
  const auto inc = pim_step(d, alpha, PimParams{true, 1.0, 3}, eps, amp);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_DOUBLE_EQ(inc[i], alpha * d[i]);
    EXPECT_DOUBLE_EQ(amp[i], alpha * d[i]);
  }
}

TEST(Pim, OverflowIsProjectedToNeighbours) {
  Tensor<double> d({1, 3, 3});
  d[4] = 1.0;  // only the centre moves
  Tensor<double> amp({1, 3, 3});
  amp[4] = 0.1;
  const double alpha = 0.02, eps = 0.05, beta = 2.5;
  const auto inc = pim_step(d, alpha, PimParams{true, beta, 3}, eps, amp);
  // a_centre = 0.1 + 0.05 = 0.15, cut 0.1 spread to every cell of the 3x3 window.
  for (std::size_t i = 0; i < 9; ++i) {
    const double p = beta * alpha;
    EXPECT_DOUBLE_EQ(inc[i], (i == 4 ? beta * alpha : 0.0) + p) << i;
  }
}
