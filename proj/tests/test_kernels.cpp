#include <gtest/gtest.h>
#include <omp.h>

#include "naa/kernels.hpp"
#include "naa/rng.hpp"

using namespace naa;
using namespace naa::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

struct ConvCase {
  ConvGeometry g;
  std::vector<double> in, w, b, gout;
};

ConvCase conv_case(std::uint64_t seed, std::size_t stride, std::size_t pad) {
  Rng rng(seed);
  ConvCase c;
  c.g = {3, 9, 8, 5, 3, 3, stride, pad};
  c.in = random_vec(3 * 9 * 8, rng);
  c.w = random_vec(5 * 3 * 9, rng);
  c.b = random_vec(5, rng);
  c.gout = random_vec(5 * c.g.out_h() * c.g.out_w(), rng);
  return c;
}

}  // namespace

class ConvKernels : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(ConvKernels, ParallelMatchesSerialReference) {
  const auto [stride, pad] = GetParam();
  const ConvCase c = conv_case(7, stride, pad);
  const std::size_t out_n = 5 * c.g.out_h() * c.g.out_w();
  std::vector<double> o1(out_n), o2(out_n);
  serial::conv2d_forward<double>(c.g, c.in, c.w, c.b, o1);
  parallel::conv2d_forward<double>(c.g, c.in, c.w, c.b, o2);
  expect_close(o1, o2, 1e-12);

  std::vector<double> gi1(c.in.size()), gi2(c.in.size());
  serial::conv2d_backward_input<double>(c.g, c.gout, c.w, gi1);
  parallel::conv2d_backward_input<double>(c.g, c.gout, c.w, gi2);
  expect_close(gi1, gi2, 1e-12);

  std::vector<double> gw1(c.w.size()), gw2(c.w.size()), gb1(5), gb2(5);
  serial::conv2d_backward_params<double>(c.g, c.in, c.gout, gw1, gb1);
  parallel::conv2d_backward_params<double>(c.g, c.in, c.gout, gw2, gb2);
  expect_close(gw1, gw2, 1e-12);
  expect_close(gb1, gb2, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(StridePadding, ConvKernels,
                         ::testing::Values(std::pair<std::size_t, std::size_t>{1, 0},
                                           std::pair<std::size_t, std::size_t>{1, 1},
                                           std::pair<std::size_t, std::size_t>{2, 1}));

TEST(ConvKernels, SerialMatchesHandComputedValue) {
  // 1 channel 3x3 input, 2x2 kernel of ones, bias 0.5.
  const ConvGeometry g{1, 3, 3, 1, 2, 2, 1, 0};
  const std::vector<double> in{1, 2, 3, 4, 5, 6, 7, 8, 9}, w{1, 1, 1, 1}, b{0.5};
  std::vector<double> out(4);
  serial::conv2d_forward<double>(g, in, w, b, out);
  EXPECT_EQ(out, (std::vector<double>{12.5, 16.5, 24.5, 28.5}));
}

TEST(DenseKernels, ParallelMatchesSerialReference) {
  Rng rng(3);
  const DenseGeometry g{37, 11};
  const auto in = random_vec(37, rng), w = random_vec(37 * 11, rng), b = random_vec(11, rng),
             gout = random_vec(11, rng);
  std::vector<double> o1(11), o2(11), gi1(37), gi2(37), gw1(w.size()), gw2(w.size()), gb1(11), gb2(11);
  serial::dense_forward<double>(g, in, w, b, o1);
  parallel::dense_forward<double>(g, in, w, b, o2);
  expect_close(o1, o2, 1e-12);
  serial::dense_backward_input<double>(g, gout, w, gi1);
  parallel::dense_backward_input<double>(g, gout, w, gi2);
  expect_close(gi1, gi2, 1e-12);
  serial::dense_backward_params<double>(g, in, gout, gw1, gb1);
  parallel::dense_backward_params<double>(g, in, gout, gw2, gb2);
  expect_close(gw1, gw2, 1e-12);
  expect_close(gb1, gb2, 1e-12);
}

TEST(DenseKernels, BackwardParamsAccumulates) {
  const DenseGeometry g{2, 1};
  const std::vector<double> in{1, 2}, gout{3};
  std::vector<double> gw{10, 10}, gb{1};
  parallel::dense_backward_params<double>(g, in, gout, gw, gb);
  EXPECT_EQ(gw, (std::vector<double>{13, 16}));
  EXPECT_EQ(gb, (std::vector<double>{4}));
}

TEST(ParallelKernels, BitwiseIndependentOfThreadCount) {
  const ConvCase c = conv_case(11, 1, 1);
  const std::size_t out_n = 5 * c.g.out_h() * c.g.out_w();
  const int saved = omp_get_max_threads();
  std::vector<std::vector<double>> outs, grads;
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    std::vector<double> o(out_n), gw(c.w.size()), gb(5);
    parallel::conv2d_forward<double>(c.g, c.in, c.w, c.b, o);
    parallel::conv2d_backward_params<double>(c.g, c.in, c.gout, gw, gb);
    outs.push_back(o);
    grads.push_back(gw);
  }
  omp_set_num_threads(saved);
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_EQ(outs[0], outs[2]);
  EXPECT_EQ(grads[0], grads[1]);
  EXPECT_EQ(grads[0], grads[2]);
}
