#include "naa/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "naa/model_io.hpp"

namespace naa::verify {
namespace {

using L = Layer<double>;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<std::size_t> all_but_last(std::size_t n) {
  std::vector<std::size_t> t;
  for (std::size_t i = 0; i + 1 < n; ++i) t.push_back(i);
  return t;
}

Network<double> assemble(Shape input, std::vector<L> layers, std::size_t classes, std::uint64_t seed,
                         double bias_scale) {
  const std::size_t n = layers.size();
  Network<double> net(std::move(input), std::move(layers), classes, all_but_last(n));
  randomize(net, seed, bias_scale);
  return net;
}

double logit(const Network<double>& m, const Tensor<double>& x, std::size_t c) {
  return m.forward(x, Exec::serial).logits[c];
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// FD error on a handful of parameters of every dense/conv layer.
double param_gradient_error(Network<double> model, const Tensor<double>& x, std::size_t c, double h, Rng& rng) {
  const Trace<double> tr = model.trace(x, kAllActs, Exec::serial);
  Tensor<double> seed({model.class_count()});
  seed[c] = 1.0;
  std::vector<LayerGrads<double>> grads = model.zero_grads();
  model.pullback(tr, model.layer_count(), seed, 0, nullptr, &grads, Exec::serial);
  std::vector<double> analytic, numeric;
  for (std::size_t li = 0; li < model.layer_count(); ++li) {
    if (!model.layers()[li].has_params()) continue;
    for (int k = 0; k < 6; ++k) {
      const bool bias = k % 3 == 2;
      Tensor<double>& p = bias ? model.mutable_layers()[li].bias : model.mutable_layers()[li].weights;
      const std::size_t j = rng.below(p.size());
      const double keep = p[j];
      p[j] = keep + h;
      const double up = logit(model, x, c);
      p[j] = keep - h;
      const double down = logit(model, x, c);
      p[j] = keep;
      analytic.push_back(bias ? grads[li].bias[j] : grads[li].weights[j]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = numeric[i] - analytic[i];
  return l2(diff) / std::max(l2(analytic), 1e-12);
}

}  // namespace

template <typename T>
void randomize(Network<T>& model, std::uint64_t seed, double bias_scale) {
  Rng rng(seed);
  for (Layer<T>& l : model.mutable_layers()) {
    if (!l.has_params()) continue;
    const std::size_t fan_in = l.kind == LayerKind::dense ? l.in : l.in * l.kernel_h * l.kernel_w;
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (T& w : l.weights.data()) w = static_cast<T>(scale * rng.normal());
    for (T& b : l.bias.data()) b = static_cast<T>(bias_scale * rng.normal());
  }
}

Network<double> relu_mlp(const std::vector<std::size_t>& widths, std::uint64_t seed, double bias_scale) {
  if (widths.size() < 2) throw ValueError("mlp needs at least input and output widths");
  std::vector<L> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back(L::dense(widths[i], widths[i + 1]));
    if (i + 2 < widths.size()) layers.push_back(L::relu());
  }
  layers.push_back(L::logits());
  return assemble({widths.front()}, std::move(layers), widths.back(), seed, bias_scale);
}

Network<double> linear_above_tap(std::uint64_t seed) {
  Network<double> net = assemble({12},
                                 {L::dense(12, 10), L::relu(), L::dense(10, 8), L::relu(), L::dense(8, 6),
                                  L::dense(6, 4), L::logits()},
                                 4, seed, 0.3);
  for (std::size_t i : {0u, 2u}) {
    for (double& b : net.mutable_layers()[i].bias.data()) b = 0.0;
  }
  return net;
}

Tensor<double> random_unit(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

Network<double> layer_probe(LayerKind kind, Rng& rng) {
  const std::uint64_t seed = rng.next();
  switch (kind) {
    case LayerKind::dense:
      return assemble({7}, {L::dense(7, 5), L::dense(5, 3), L::logits()}, 3, seed, 0.1);
    case LayerKind::relu:
      return assemble({7}, {L::dense(7, 6), L::relu(), L::dense(6, 3), L::logits()}, 3, seed, 0.1);
    case LayerKind::conv2d: {
      const std::size_t k = 1 + rng.below(3), s = 1 + rng.below(2), p = rng.below(std::min<std::size_t>(k, 2));
      const std::size_t o = (6 + 2 * p - k) / s + 1;
      return assemble({2, 6, 6}, {L::conv2d(2, 3, k, s, p), L::flatten(), L::dense(3 * o * o, 3), L::logits()}, 3,
                      seed, 0.1);
    }
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d: {
      static constexpr std::size_t kShapes[4][2] = {{2, 2}, {3, 1}, {3, 3}, {2, 1}};
      const auto& ks = kShapes[rng.below(4)];
      const std::size_t o = (6 - ks[0]) / ks[1] + 1;
      const L pool = kind == LayerKind::maxpool2d ? L::maxpool2d(ks[0], ks[1]) : L::avgpool2d(ks[0], ks[1]);
      return assemble({2, 6, 6},
                      {L::conv2d(2, 2, 3, 1, 1), pool, L::flatten(), L::dense(2 * o * o, 3), L::logits()}, 3, seed,
                      0.1);
    }
    case LayerKind::flatten:
      return assemble({2, 3, 3}, {L::flatten(), L::dense(18, 3), L::logits()}, 3, seed, 0.1);
    case LayerKind::logits:
      return assemble({5}, {L::dense(5, 3), L::logits()}, 3, seed, 0.1);
  }
  throw ValueError("unknown layer kind");
}

bool near_kink(const Network<double>& model, const Tensor<double>& x, double margin) {
  const Trace<double> tr = model.trace(x, kAllActs, Exec::serial);
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const Layer<double>& l = model.layers()[i];
    const Tensor<double>& in = tr.acts[i];
    if (l.kind == LayerKind::relu) {
      for (double v : in.data()) {
        if (std::abs(v) < margin) return true;
      }
    } else if (l.kind == LayerKind::maxpool2d) {
      const std::size_t c = in.shape()[0], h = in.shape()[1], w = in.shape()[2];
      const std::size_t oh = (h - l.kernel_h) / l.stride + 1, ow = (w - l.kernel_w) / l.stride + 1;
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t i0 = 0; i0 < oh; ++i0) {
          for (std::size_t j0 = 0; j0 < ow; ++j0) {
            std::vector<double> win;
            for (std::size_t a = 0; a < l.kernel_h; ++a) {
              for (std::size_t b = 0; b < l.kernel_w; ++b) {
                win.push_back(in[(k * h + i0 * l.stride + a) * w + j0 * l.stride + b]);
              }
            }
            std::partial_sort(win.begin(), win.begin() + 2, win.end(), std::greater<>());
            if (win[0] - win[1] < margin) return true;
          }
        }
      }
    }
  }
  return false;
}

double input_gradient_error(const Network<double>& model, const Tensor<double>& x, std::size_t c, double h) {
  const Tensor<double> g = model.backward(x, c, Exec::serial).grad_wrt_input;
  std::vector<double> diff(x.size()), ref(g.values());
  Tensor<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = logit(model, xp, c);
    xp[i] = x[i] - h;
    const double down = logit(model, xp, c);
    xp[i] = x[i];
    diff[i] = (up - down) / (2 * h) - g[i];
  }
  return l2(diff) / std::max(l2(ref), 1e-12);
}

CheckResult check_gradients(std::size_t cases_per_kind, std::uint64_t seed) {
  constexpr double h = 1e-5;
  CheckResult r{"gradients-fd", true, ""};
  double worst = 0.0;
  std::size_t total = 0;
  for (LayerKind kind : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2d,
                         LayerKind::avgpool2d, LayerKind::flatten, LayerKind::logits}) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind)));
    double kind_worst = 0.0;
    for (std::size_t n = 0; n < cases_per_kind; ++n) {
      Network<double> net = layer_probe(kind, rng);
      Tensor<double> x = random_unit(net.input_shape(), rng);
      while (near_kink(net, x, 1e-3)) x = random_unit(net.input_shape(), rng);
      const std::size_t c = rng.below(net.class_count());
      double err = input_gradient_error(net, x, c, h);
      if (kind == LayerKind::dense || kind == LayerKind::conv2d) err = std::max(err, param_gradient_error(net, x, c, h, rng));
      kind_worst = std::max(kind_worst, err);
      ++total;
    }
    worst = std::max(worst, kind_worst);
    r.detail += std::string(layer_kind_name(kind)) + "=" + sci(kind_worst) + " ";
  }
  r.passed = worst <= 1e-5;
  r.detail = std::to_string(total) + " cases, worst rel-err per kind: " + r.detail;
  return r;
}

CheckResult check_completeness_convergence(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"completeness-convergence", true, ""};
  std::size_t worse = 0;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k < cases; ++k) {
    Rng rng(derive_seed(seed, 1000 + k));
    const Network<double> net = relu_mlp({16, 16, 16, 4}, rng.next(), 0.1);
    const Tensor<double> x = random_unit({16}, rng);
    const std::size_t c = k % 4;
    const double r4 = completeness_report(net, x, PathSpec<double>::black({16}, 4), {1}, c)[0].residual;
    const double r128 = completeness_report(net, x, PathSpec<double>::black({16}, 128), {1}, c)[0].residual;
    if (r128 > r4) ++worse;
    worst_ratio = std::max(worst_ratio, r128 / std::max(r4, 1e-300));
  }
  r.passed = worse == 0;
  r.detail = std::to_string(cases) + " relu MLPs, residual(n=128) > residual(n=4) in " + std::to_string(worse) +
             " cases, worst ratio " + sci(worst_ratio);
  return r;
}

CheckResult check_layer_independence(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"layer-independence", true, ""};
  double worst = 0.0;
  for (std::size_t k = 0; k < cases; ++k) {
    Rng rng(derive_seed(seed, 2000 + k));
    const Network<double> net = relu_mlp({16, 16, 16, 4}, rng.next(), 0.1);
    const Tensor<double> x = random_unit({16}, rng);
    const auto rec = completeness_report(net, x, PathSpec<double>::black({16}, 50), {1, 3}, k % 4);
    const double scale = std::max({std::abs(rec[0].total), std::abs(rec[1].total), 1e-12});
    worst = std::max(worst, std::abs(rec[0].total - rec[1].total) / scale);
  }
  r.passed = worst <= 1e-6;
  r.detail = std::to_string(cases) + " cases, worst relative gap between taps 1 and 3: " + sci(worst);
  return r;
}

CheckResult check_factorization_exactness(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"factorization-exactness", true, ""};
  double worst = 0.0;
  for (std::size_t k = 0; k < cases; ++k) {
    Rng rng(derive_seed(seed, 3000 + k));
    const Network<double> net = linear_above_tap(rng.next());
    const Tensor<double> x = random_unit({12}, rng);
    const auto path = PathSpec<double>::black({12}, 30);
    const auto exact = exact_neuron_attribution(net, x, path, kLinearAboveTap, k % 4);
    const auto fact = factorized_attribution(net, x, path, kLinearAboveTap, k % 4);
    for (std::size_t j = 0; j < exact.values.size(); ++j) {
      worst = std::max(worst, std::abs(exact.values[j] - fact.values[j]));
    }
  }
  r.passed = worst <= 1e-9;
  r.detail = std::to_string(cases) + " linear-above-tap networks, worst |exact - factorized| " + sci(worst);
  return r;
}

Fixture make_fixture(std::uint64_t seed) {
  Rng rng(seed);
  // Round-trip through the f32 model format so the stored model is exact.
  const Network<double> raw = relu_mlp({16, 16, 4}, rng.next(), 0.1);
  Fixture f;
  f.model = decode_model<double>(encode_model(raw));
  f.input = Tensor<double>({16});
  for (double& v : f.input.data()) v = static_cast<double>(static_cast<float>(rng.uniform()));
  f.tap = 1;
  f.output_index = 0;
  f.steps = 200;
  const auto path = PathSpec<double>::black({16}, f.steps);
  const auto field = exact_neuron_attribution(f.model, f.input, path, f.tap, f.output_index);
  f.values = field.values.values();
  f.total = field.total;
  f.residual = completeness_report(f.model, f.input, path, {f.tap}, f.output_index)[0].residual;
  return f;
}

void write_fixture(const Fixture& f, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_model(f.model, (std::filesystem::path(dir) / "mlp16.naam").string());
  nlohmann::ordered_json j;
  j["model"] = "mlp16.naam";
  j["input"] = f.input.values();
  j["tap"] = f.tap;
  j["output_index"] = f.output_index;
  j["n"] = f.steps;
  j["values"] = f.values;
  j["total"] = f.total;
  j["residual"] = f.residual;
  std::ofstream(std::filesystem::path(dir) / "mlp16.json") << j.dump(2) << "\n";
}

Fixture read_fixture(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "mlp16.json";
  std::ifstream in(path);
  if (!in) throw FormatError("missing fixture: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Fixture f;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    f.model = read_model<double>((std::filesystem::path(dir) / j.at("model").get<std::string>()).string());
    const auto input = j.at("input").get<std::vector<double>>();
    f.input = Tensor<double>({input.size()}, input);
    f.tap = j.at("tap").get<std::size_t>();
    f.output_index = j.at("output_index").get<std::size_t>();
    f.steps = j.at("n").get<std::size_t>();
    f.values = j.at("values").get<std::vector<double>>();
    f.total = j.at("total").get<double>();
    f.residual = j.at("residual").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fixture: ") + e.what());
  }
  return f;
}

CheckResult check_fixture(const std::string& dir) {
  CheckResult r{"fixture-oracle", true, ""};
  const Fixture f = read_fixture(dir);
  const auto path = PathSpec<double>::black(f.input.shape(), f.steps);
  const auto field = exact_neuron_attribution(f.model, f.input, path, f.tap, f.output_index);
  if (field.values.size() != f.values.size()) {
    r.passed = false;
    r.detail = "field size differs from the fixture";
    return r;
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    worst = std::max(worst, std::abs(field.values[j] - f.values[j]) / std::max(1.0, std::abs(f.values[j])));
  }
  const double residual = completeness_report(f.model, f.input, path, {f.tap}, f.output_index)[0].residual;
  worst = std::max({worst, std::abs(field.total - f.total), std::abs(residual - f.residual)});
  r.passed = worst <= 1e-9;
  r.detail = "n=" + std::to_string(f.steps) + ", worst deviation from frozen values " + sci(worst) +
             ", completeness residual " + sci(residual);
  return r;
}

CheckResult check_precision_agreement(const std::string& dir) {
  CheckResult r{"f32-agreement", true, ""};
  const Fixture f = read_fixture(dir);
  const Network<float> m32 = f.model.cast<float>();
  const Tensor<float> x32 = f.input.cast<float>();
  const auto l64 = f.model.forward(f.input).logits;
  const auto l32 = m32.forward(x32).logits;
  const auto ia64 = integrated_attention(f.model, f.input, PathSpec<double>::black(f.input.shape(), 30), f.tap,
                                         f.output_index).values;
  const auto ia32 =
      integrated_attention(m32, x32, PathSpec<float>::black(x32.shape(), 30), f.tap, f.output_index).values;
  const auto rel = [](const Tensor<double>& a, const Tensor<float>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num = std::max(num, std::abs(a[i] - static_cast<double>(b[i])));
      den = std::max(den, std::abs(a[i]));
    }
    return num / std::max(den, 1e-12);
  };
  const double worst = std::max(rel(l64, l32), rel(ia64, ia32));
  r.passed = worst <= 1e-4;
  r.detail = "logits and IA, worst relative deviation " + sci(worst);
  return r;
}

std::vector<CheckResult> run_all(const std::string& fixture_dir, const std::string& precision, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded("gradients-fd", [&] { return check_gradients(20, seed); });
  guarded("completeness-convergence", [&] { return check_completeness_convergence(20, seed); });
  guarded("layer-independence", [&] { return check_layer_independence(20, seed); });
  guarded("factorization-exactness", [&] { return check_factorization_exactness(10, seed); });
  guarded("fixture-oracle", [&] { return check_fixture(fixture_dir); });
  if (precision == "f32") guarded("f32-agreement", [&] { return check_precision_agreement(fixture_dir); });
  return out;
}

template void randomize<float>(Network<float>&, std::uint64_t, double);
template void randomize<double>(Network<double>&, std::uint64_t, double);

}  // namespace naa::verify
