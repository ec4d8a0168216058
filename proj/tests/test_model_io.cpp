#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "naa/model_io.hpp"
#include "naa/rng.hpp"
#include "naa/verify.hpp"
#include "naa/zoo.hpp"

using namespace naa;

namespace {

Network<float> sample_model() {
  Network<float> m = build_architecture<float>("strided");
  init_params(m, 3);
  return m;
}

}  // namespace

TEST(ModelIo, RoundTripIsExactAndCanonical) {
  const Network<float> m = sample_model();
  const auto bytes = encode_model(m);
  const Network<float> back = decode_model<float>(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(encode_model(back), bytes);
}

TEST(ModelIo, DoubleModelsStoreF32Parameters) {
  const Network<double> m = verify::relu_mlp({5, 4, 3}, 1, 0.1);
  const Network<double> back = decode_model<double>(encode_model(m));
  const auto& w0 = m.layers()[0].weights, &w1 = back.layers()[0].weights;
  for (std::size_t i = 0; i < w0.size(); ++i) EXPECT_EQ(w1[i], static_cast<double>(static_cast<float>(w0[i])));
}

TEST(ModelIo, RejectsCorruptedHeaders) {
  auto bytes = encode_model(sample_model());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_model<float>(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(decode_model<float>(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  EXPECT_THROW(decode_model<float>(truncated), FormatError);
  auto bad_tap = bytes;
  bad_tap[19] = 200;  // low byte of the first tap index (after a rank-3 input shape)
  EXPECT_THROW(decode_model<float>(bad_tap), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_model<float>(trailing), FormatError);
}

TEST(ModelIo, FuzzedBytesOnlyRaiseLibraryErrors) {
  const auto bytes = encode_model(verify::relu_mlp({6, 5, 3}, 2, 0.1).cast<float>());
  Rng rng(17);
  std::size_t rejected = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto b = bytes;
    const std::size_t flips = 1 + rng.below(4);
    for (std::size_t k = 0; k < flips; ++k) b[rng.below(b.size())] = static_cast<std::uint8_t>(rng.below(256));
    if (rng.bernoulli(0.3)) b.resize(rng.below(b.size() + 1));
    try {
      decode_model<float>(b);
    } catch (const Error&) {
      ++rejected;
    } catch (const std::exception& e) {
      FAIL() << "non-library exception: " << e.what();
    }
  }
  EXPECT_GT(rejected, 0u);
}

TEST(ModelIo, MissingFileIsNamed) {
  try {
    read_model<float>("/nonexistent/dir/m.naam");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/m.naam"), std::string::npos);
  }
}

TEST(ModelIo, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "naa_io_test.naam").string();
  const Network<float> m = sample_model();
  write_model(m, path);
  EXPECT_EQ(read_model<float>(path), m);
  std::filesystem::remove(path);
}

TEST(ModelIo, DecodesHandWrittenBytes) {
  // dense 2->1 with weights {0.5, -2}, bias {1}, then logits; one tap on layer 0.
  std::vector<std::uint8_t> b{'N', 'A', 'A', 'M', 1, 0, 1, 0, 1, 2, 0, 2, 0, 1, 0, 0, 0, 1, 2, 0, 1, 0};
  const auto put_f32s = [&](std::initializer_list<float> vs) {
    const std::uint32_t n = static_cast<std::uint32_t>(vs.size());
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(n >> (8 * k)));
    for (float v : vs) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
    }
  };
  put_f32s({0.5f, -2.0f});
  put_f32s({1.0f});
  b.push_back(7);
  const Network<double> m = decode_model<double>(b);
  EXPECT_EQ(m.taps(), (std::vector<std::size_t>{0}));
  EXPECT_DOUBLE_EQ(m.forward(Tensor<double>({2}, {4.0, 1.0})).logits[0], 1.0);
}
