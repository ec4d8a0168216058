#include "naa/model_io.hpp"

#include <cmath>
#include <limits>

#include "byte_io.hpp"

namespace naa {
namespace {

constexpr char kMagic[4] = {'N', 'A', 'A', 'M'};

std::uint16_t narrow16(std::size_t v, const char* field) {
  if (v > std::numeric_limits<std::uint16_t>::max()) {
    throw FormatError(std::string("model field ") + field + " exceeds u16 range");
  }
  return static_cast<std::uint16_t>(v);
}

template <typename T>
void put_blob(detail::ByteWriter& w, const Tensor<T>& t) {
  if (t.size() > std::numeric_limits<std::uint32_t>::max()) throw FormatError("parameter blob too large");
  w.u32(static_cast<std::uint32_t>(t.size()));
  for (T v : t.data()) w.f32(static_cast<float>(v));
}

template <typename T>
Tensor<T> get_blob(detail::ByteReader& r, const Shape& expected, const char* field) {
  const std::uint32_t count = r.u32(field);
  std::uint64_t declared = 1;
  for (std::size_t e : expected) {
    declared *= e;
    if (declared > std::numeric_limits<std::uint32_t>::max()) {
      throw FormatError(std::string("model ") + field + " shape overflow " + shape_str(expected));
    }
  }
  if (count != declared) {
    throw FormatError(std::string("model ") + field + " count " + std::to_string(count) +
                      " does not match declared shape " + shape_str(expected));
  }
  r.need(static_cast<std::size_t>(count) * 4, field);
  std::vector<T> data(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const float v = r.f32(field);
    if (!std::isfinite(v)) throw FormatError(std::string("model ") + field + " contains a non-finite value");
    data[i] = static_cast<T>(v);
  }
  return Tensor<T>(expected, std::move(data));
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_model(const Network<T>& model) {
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kModelFormatVersion);
  w.u16(narrow16(model.class_count(), "class_count"));
  const Shape& in = model.input_shape();
  if (in.size() > 255) throw FormatError("input rank too large");
  w.u8(static_cast<std::uint8_t>(in.size()));
  for (std::size_t e : in) w.u16(narrow16(e, "input extent"));
  w.u16(narrow16(model.layer_count(), "layer count"));
  w.u16(narrow16(model.taps().size(), "tap count"));
  for (std::size_t t : model.taps()) w.u16(narrow16(t, "tap"));
  for (const Layer<T>& l : model.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    switch (l.kind) {
      case LayerKind::conv2d:
        w.u16(narrow16(l.in, "in"));
        w.u16(narrow16(l.out, "out"));
        w.u16(narrow16(l.kernel_h, "kernel_h"));
        w.u16(narrow16(l.kernel_w, "kernel_w"));
        w.u16(narrow16(l.stride, "stride"));
        w.u16(narrow16(l.padding, "padding"));
        put_blob(w, l.weights);
        put_blob(w, l.bias);
        break;
      case LayerKind::dense:
        w.u16(narrow16(l.in, "in"));
        w.u16(narrow16(l.out, "out"));
        put_blob(w, l.weights);
        put_blob(w, l.bias);
        break;
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d:
        w.u16(narrow16(l.kernel_h, "kernel_h"));
        w.u16(narrow16(l.kernel_w, "kernel_w"));
        w.u16(narrow16(l.stride, "stride"));
        break;
      case LayerKind::relu:
      case LayerKind::flatten:
      case LayerKind::logits:
        break;
    }
  }
  return w.take();
}

template <typename T>
Network<T> decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "model");
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("model: magic mismatch (expected NAAM)");
  const std::uint16_t version = r.u16("version");
  if (version != kModelFormatVersion) {
    throw FormatError("model: unsupported format version " + std::to_string(version));
  }
  const std::size_t class_count = r.u16("class_count");
  const std::size_t rank = r.u8("input rank");
  if (rank == 0) throw FormatError("model: input rank must be positive");
  Shape input;
  for (std::size_t i = 0; i < rank; ++i) input.push_back(r.u16("input extent"));
  const std::size_t layer_count = r.u16("layer count");
  const std::size_t tap_count = r.u16("tap count");
  std::vector<std::size_t> taps;
  for (std::size_t i = 0; i < tap_count; ++i) taps.push_back(r.u16("tap"));

  std::vector<Layer<T>> layers;
  for (std::size_t i = 0; i < layer_count; ++i) {
    const std::uint8_t tag = r.u8("layer kind");
    Layer<T> l;
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::conv2d: {
        const std::size_t cin = r.u16("in"), cout = r.u16("out");
        const std::size_t kh = r.u16("kernel_h"), kw = r.u16("kernel_w");
        const std::size_t stride = r.u16("stride"), pad = r.u16("padding");
        if (cin == 0 || cout == 0 || kh == 0 || kw == 0 || stride == 0) {
          throw FormatError("model: conv2d layer " + std::to_string(i) + " has a zero parameter");
        }
        l.kind = LayerKind::conv2d;
        l.in = cin;
        l.out = cout;
        l.kernel_h = kh;
        l.kernel_w = kw;
        l.stride = stride;
        l.padding = pad;
        l.weights = get_blob<T>(r, {cout, cin, kh, kw}, "conv weights");
        l.bias = get_blob<T>(r, {cout}, "conv bias");
        break;
      }
      case LayerKind::dense: {
        const std::size_t fin = r.u16("in"), fout = r.u16("out");
        if (fin == 0 || fout == 0) throw FormatError("model: dense layer " + std::to_string(i) + " has a zero extent");
        l.kind = LayerKind::dense;
        l.in = fin;
        l.out = fout;
        l.weights = get_blob<T>(r, {fout, fin}, "dense weights");
        l.bias = get_blob<T>(r, {fout}, "dense bias");
        break;
      }
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d:
        l.kind = static_cast<LayerKind>(tag);
        l.kernel_h = r.u16("kernel_h");
        l.kernel_w = r.u16("kernel_w");
        l.stride = r.u16("stride");
        break;
      case LayerKind::relu:
      case LayerKind::flatten:
      case LayerKind::logits:
        l.kind = static_cast<LayerKind>(tag);
        break;
      default:
        throw FormatError("model: unknown layer kind tag " + std::to_string(tag) + " at layer " +
                          std::to_string(i));
    }
    layers.push_back(std::move(l));
  }
  if (r.remaining() != 0) {
    throw FormatError("model: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  try {
    return Network<T>(std::move(input), std::move(layers), class_count, std::move(taps));
  } catch (const Error& e) {
    throw FormatError(std::string("model: inconsistent layer chain or taps: ") + e.what());
  }
}

template <typename T>
void write_model(const Network<T>& model, const std::string& path) {
  detail::write_file(path, encode_model(model));
}

template <typename T>
Network<T> read_model(const std::string& path) {
  const auto bytes = detail::read_file(path);
  return decode_model<T>(bytes);
}

template std::vector<std::uint8_t> encode_model<float>(const Network<float>&);
template std::vector<std::uint8_t> encode_model<double>(const Network<double>&);
template Network<float> decode_model<float>(std::span<const std::uint8_t>);
template Network<double> decode_model<double>(std::span<const std::uint8_t>);
template void write_model<float>(const Network<float>&, const std::string&);
template void write_model<double>(const Network<double>&, const std::string&);
template Network<float> read_model<float>(const std::string&);
template Network<double> read_model<double>(const std::string&);

}  // namespace naa
