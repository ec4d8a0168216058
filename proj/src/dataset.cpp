#include "naa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "byte_io.hpp"
#include "naa/rng.hpp"

namespace naa {
namespace {

constexpr char kMagic[4] = {'N', 'A', 'A', 'D'};

// Whether offset (dx, dy) from the shape center lies on the shape of class k
// (taken modulo the ten base geometries) with half-extent r.
bool on_shape(std::size_t k, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  const double dist = std::sqrt(dx * dx + dy * dy);
  const bool in_box = ax <= r && ay <= r;
  switch (k % 10) {
    case 0:  // disc
      return dist <= r;
    case 1:  // filled square
      return std::max(ax, ay) <= 0.8 * r;
    case 2:  // upward triangle
      return dy >= -r && dy <= r && ax <= (dy + r) / 2.0;
    case 3:  // horizontal stripes
      return in_box && static_cast<long>(std::floor((dy + r) / 3.0)) % 2 == 0;
    case 4:  // vertical stripes
      return in_box && static_cast<long>(std::floor((dx + r) / 3.0)) % 2 == 0;
    case 5:  // plus
      return (ax <= r / 3.5 && ay <= r) || (ay <= r / 3.5 && ax <= r);
    case 6:  // ring
      return dist <= r && dist >= 0.55 * r;
    case 7:  // X
      return ax <= r && std::abs(ax - ay) <= 1.3;
    case 8:  // checkerboard
      return in_box && (static_cast<long>(std::floor((dx + r) / 4.0)) +
                        static_cast<long>(std::floor((dy + r) / 4.0))) % 2 == 0;
    default: {  // two stacked dots
      const double d1 = std::hypot(dx, dy - r / 2.0), d2 = std::hypot(dx, dy + r / 2.0);
      return std::min(d1, d2) <= r / 2.6;
    }
  }
}

void render(std::size_t label, const SyntheticOptions& o, Rng& rng, std::span<float> out) {
  const std::size_t n = o.size;
  const double half = static_cast<double>(n) / 2.0;
  const double jitter = static_cast<double>(n) / 8.0;
  const double cx = half - 0.5 + rng.uniform(-jitter, jitter);
  const double cy = half - 0.5 + rng.uniform(-jitter, jitter);
  const double r = static_cast<double>(n) * rng.uniform(0.22, 0.34);
  std::vector<double> bg(o.channels), fg(o.channels);
  for (std::size_t c = 0; c < o.channels; ++c) {
    bg[c] = rng.uniform(0.0, 0.3);
    fg[c] = rng.uniform(0.55, 1.0);
  }
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const bool fore = on_shape(label, static_cast<double>(x) - cx, static_cast<double>(y) - cy, r);
      for (std::size_t c = 0; c < o.channels; ++c) {
        const double v = (fore ? fg[c] : bg[c]) + 0.05 * rng.normal();
        out[(c * n + y) * n + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

}  // namespace

Dataset Dataset::slice(std::size_t first, std::size_t n) const {
  if (first + n > count()) throw ValueError("dataset slice out of range");
  Dataset d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(first * image_size()),
                  pixels.begin() + static_cast<std::ptrdiff_t>((first + n) * image_size()));
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                  labels.begin() + static_cast<std::ptrdiff_t>(first + n));
  return d;
}

Dataset generate_synthetic(const SyntheticOptions& o) {
  if (o.count == 0) throw ValueError("synthetic dataset needs count > 0");
  if (o.classes == 0 || o.classes > std::numeric_limits<std::uint16_t>::max()) {
    throw ValueError("class count out of range");
  }
  if (o.size < 8 || o.channels == 0) throw ValueError("synthetic images need size >= 8 and channels > 0");
  Dataset d;
  d.channels = o.channels;
  d.height = o.size;
  d.width = o.size;
  d.pixels.resize(o.count * d.image_size());
  d.labels.resize(o.count);
  for (std::size_t i = 0; i < o.count; ++i) {
    const std::size_t index = o.first_index + i;
    Rng rng(derive_seed(o.seed, index));
    const std::size_t label = o.stratified ? index % o.classes : rng.below(o.classes);
    d.labels[i] = static_cast<std::uint16_t>(label);
    render(label, o, rng, std::span<float>(d.pixels).subspan(i * d.image_size(), d.image_size()));
  }
  return d;
}

SplitDataset generate_default_split(std::uint64_t seed, std::size_t train_count, std::size_t test_count) {
  SyntheticOptions o;
  o.seed = seed;
  o.count = train_count;
  SplitDataset s;
  s.train = generate_synthetic(o);
  o.first_index = train_count;
  o.count = test_count;
  s.test = generate_synthetic(o);
  return s;
}

std::vector<std::size_t> class_histogram(const Dataset& data, std::size_t classes) {
  std::vector<std::size_t> h(classes, 0);
  for (std::uint16_t l : data.labels) {
    if (l >= classes) throw ValueError("label " + std::to_string(l) + " >= class count");
    ++h[l];
  }
  return h;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  if (d.count() == 0) throw FormatError("empty dataset");
  if (d.count() > std::numeric_limits<std::uint32_t>::max() || d.channels > 0xFFFF || d.height > 0xFFFF ||
      d.width > 0xFFFF) {
    throw FormatError("dataset dimensions exceed format range");
  }
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kDatasetFormatVersion);
  w.u32(static_cast<std::uint32_t>(d.count()));
  w.u16(static_cast<std::uint16_t>(d.channels));
  w.u16(static_cast<std::uint16_t>(d.height));
  w.u16(static_cast<std::uint16_t>(d.width));
  for (float v : d.pixels) w.f32(v);
  for (std::uint16_t l : d.labels) w.u16(l);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "dataset");
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("dataset: magic mismatch (expected NAAD)");
  const std::uint16_t version = r.u16("version");
  if (version != kDatasetFormatVersion) {
    throw FormatError("dataset: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("count");
  if (count == 0) throw FormatError("empty dataset");
  Dataset d;
  d.channels = r.u16("channels");
  d.height = r.u16("height");
  d.width = r.u16("width");
  if (d.channels == 0 || d.height == 0 || d.width == 0) throw FormatError("dataset: zero image extent");
  if (static_cast<std::uint64_t>(count) > r.remaining() / (4 * static_cast<std::uint64_t>(d.image_size()) + 2)) {
    throw FormatError("dataset: shape overflow or truncated payload for " + std::to_string(count) + " images of " +
                      shape_str(d.image_shape()));
  }
  const std::uint64_t values = static_cast<std::uint64_t>(count) * d.image_size();
  const std::uint64_t payload = values * 4 + static_cast<std::uint64_t>(count) * 2;
  if (payload > r.remaining()) {
    throw FormatError("dataset: truncated payload (need " + std::to_string(payload) + " bytes, have " +
                      std::to_string(r.remaining()) + ")");
  }
  if (payload < r.remaining()) {
    throw FormatError("dataset: " + std::to_string(r.remaining() - payload) + " trailing bytes");
  }
  d.pixels.resize(values);
  for (std::uint64_t i = 0; i < values; ++i) {
    const float v = r.f32("pixels");
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw FormatError("dataset: pixel " + std::to_string(i) + " outside [0,1]");
    }
    d.pixels[i] = v;
  }
  d.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) d.labels[i] = r.u16("labels");
  return d;
}

void write_dataset(const Dataset& data, const std::string& path) { detail::write_file(path, encode_dataset(data)); }

Dataset read_dataset(const std::string& path) { return decode_dataset(detail::read_file(path)); }

std::uint64_t dataset_checksum(const Dataset& data) { return detail::fnv1a(encode_dataset(data)); }

}  // namespace naa
