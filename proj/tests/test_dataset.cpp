#include <gtest/gtest.h>

#include <cstring>

#include "naa/dataset.hpp"
#include "naa/rng.hpp"
#include "naa/zoo.hpp"

using namespace naa;

namespace {

SyntheticOptions small(std::uint64_t seed, std::size_t count) {
  SyntheticOptions o;
  o.seed = seed;
  o.count = count;
  return o;
}

}  // namespace

TEST(Dataset, GenerationIsAPureFunctionOfSeedAndIndex) {
  const Dataset a = generate_synthetic(small(1, 30));
  EXPECT_EQ(a, generate_synthetic(small(1, 30)));
  EXPECT_NE(a.pixels, generate_synthetic(small(2, 30)).pixels);
  SyntheticOptions tail = small(1, 10);
  tail.first_index = 20;
  EXPECT_EQ(a.slice(20, 10), generate_synthetic(tail));
}

TEST(Dataset, StratifiedLabelsCycle) {
  const Dataset d = generate_synthetic(small(0, 25));
  for (std::size_t i = 0; i < d.count(); ++i) EXPECT_EQ(d.labels[i], i % 10);
  for (float p : d.pixels) {
    EXPECT_GE(p, 0.0f);
    EXPECT_LE(p, 1.0f);
  }
}

TEST(Dataset, DefaultSplitIsBalancedAndFrozen) {
  const SplitDataset s = generate_default_split(0);
  ASSERT_EQ(s.train.count(), 6000u);
  ASSERT_EQ(s.test.count(), 1000u);
  for (std::size_t c : class_histogram(s.train, 10)) EXPECT_NEAR(static_cast<double>(c), 600.0, 1.0);
  for (std::size_t c : class_histogram(s.test, 10)) EXPECT_NEAR(static_cast<double>(c), 100.0, 1.0);
  EXPECT_EQ(hex64(dataset_checksum(s.train)), "bbcada76dd2f4c8d");
  EXPECT_EQ(hex64(dataset_checksum(s.test)), "8a9585da086e7168");
}

TEST(Dataset, EmptyIsRejected) {
  EXPECT_THROW(generate_synthetic(small(0, 0)), ValueError);
  EXPECT_THROW(encode_dataset(Dataset{}), FormatError);
}

TEST(Dataset, RoundTripIsByteExact) {
  const Dataset d = generate_synthetic(small(4, 7));
  const auto bytes = encode_dataset(d);
  EXPECT_EQ(decode_dataset(bytes), d);
  EXPECT_EQ(encode_dataset(decode_dataset(bytes)), bytes);
}

TEST(Dataset, DecodesHandWrittenFile) {
  // Two 1x1x2 images.
  std::vector<std::uint8_t> b{'N', 'A', 'A', 'D', 1, 0, 2, 0, 0, 0, 1, 0, 1, 0, 2, 0};
  for (float v : {0.0f, 0.25f, 1.0f, 0.5f}) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  for (std::uint8_t v : {3, 0, 9, 0}) b.push_back(v);
  const Dataset d = decode_dataset(b);
  EXPECT_EQ(d.count(), 2u);
  EXPECT_EQ(d.image_shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(d.labels, (std::vector<std::uint16_t>{3, 9}));
  EXPECT_EQ(d.pixels, (std::vector<float>{0.0f, 0.25f, 1.0f, 0.5f}));

  auto out_of_range = b;
  out_of_range[19] = 0x40;  // second pixel becomes 2.0f
  out_of_range[18] = 0x00;
  EXPECT_THROW(decode_dataset(out_of_range), FormatError);
  auto zero_count = b;
  zero_count[6] = 0;
  EXPECT_THROW(decode_dataset(zero_count), FormatError);
}

TEST(Dataset, FuzzedBytesOnlyRaiseLibraryErrors) {
  const auto bytes = encode_dataset(generate_synthetic(small(5, 3)));
  Rng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    auto b = bytes;
    // Corrupt mostly the header, where the interesting rejections live.
    for (std::size_t k = 0; k < 1 + rng.below(3); ++k) b[rng.below(rng.bernoulli(0.7) ? 16 : b.size())] ^= 0xFF;
    if (rng.bernoulli(0.2)) b.resize(rng.below(b.size()));
    try {
      decode_dataset(b);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL() << "non-library exception: " << e.what();
    }
  }
}

TEST(Dataset, SliceBoundsChecked) {
  const Dataset d = generate_synthetic(small(0, 5));
  EXPECT_THROW(d.slice(3, 3), ValueError);
  EXPECT_EQ(d.slice(1, 2).count(), 2u);
}
