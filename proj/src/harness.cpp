#include "naa/harness.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <omp.h>

#include "json.hpp"
#include "naa/rng.hpp"

namespace naa {
namespace {

using json = nlohmann::ordered_json;

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Runs body(i) for i in [0, n) on the OpenMP pool and rethrows the first
// exception after the loop.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr failure;
  std::mutex m;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(m);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void check_range(const Dataset& data, std::size_t first, std::size_t count) {
  if (count == 0) throw ValueError("empty evaluation set");
  if (first > data.count() || count > data.count() - first) {
    throw ValueError("evaluation range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") exceeds the dataset size " + std::to_string(data.count()));
  }
}

template <typename T>
std::vector<std::size_t> predictions(const Network<T>& model, const std::vector<Tensor<T>>& xs) {
  std::vector<std::size_t> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out[i] = model.predict(xs[i], Exec::serial); });
  return out;
}

template <typename T>
std::vector<Tensor<T>> benign_images(const Dataset& data, std::size_t first, std::size_t count) {
  std::vector<Tensor<T>> xs;
  xs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) xs.push_back(data.image<T>(first + i));
  return xs;
}

struct Tally {
  std::size_t success = 0;
  std::size_t total = 0;
  double asr() const { return total ? static_cast<double>(success) / static_cast<double>(total) : 0.0; }
};

Tally tally(const std::vector<std::size_t>& benign_pred, const std::vector<std::size_t>& adv_pred,
            const Dataset& data, std::size_t first) {
  Tally t;
  for (std::size_t i = 0; i < benign_pred.size(); ++i) {
    const std::size_t label = data.labels[first + i];
    if (benign_pred[i] != label) continue;
    ++t.total;
    if (adv_pred[i] != label) ++t.success;
  }
  return t;
}

std::string taps_str(const std::vector<std::size_t>& taps) {
  std::string s;
  for (std::size_t i = 0; i < taps.size(); ++i) s += (i ? "," : "") + std::to_string(taps[i]);
  return s;
}

}  // namespace

int apply_thread_limit() {
  if (const char* env = std::getenv("NAA_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) omp_set_num_threads(static_cast<int>(n));
  }
  return omp_get_max_threads();
}

const MatrixCell& EvalReport::cell(const std::string& source, const std::string& attack,
                                   const std::string& target) const {
  for (const auto& c : cells) {
    if (c.source == source && c.attack == attack && c.target == target) return c;
  }
  throw ValueError("no matrix cell for " + source + "/" + attack + "/" + target);
}

std::string EvalReport::report_json() const {
  json j;
  j["format"] = "naa-eval-report";
  j["version"] = 1;
  j["precision"] = precision;
  j["sample_count"] = sample_count;
  j["first_image"] = first_image;
  j["denominator"] = "images the target model classifies correctly when benign";
  j["config"] = config_text;
  j["models"] = models;
  j["source_taps"] = source_taps;
  j["attacks"] = attacks;
  j["benign_correct"] = benign_correct;
  j["cells"] = json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"source", c.source},
                          {"attack", c.attack},
                          {"target", c.target},
                          {"white_box", c.white_box},
                          {"success", c.success},
                          {"total", c.total},
                          {"asr", c.asr}});
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::matrix_csv() const {
  std::string s = "source,attack,target,white_box,success,total,asr\n";
  for (const auto& c : cells) {
    s += c.source + "," + c.attack + "," + c.target + "," + (c.white_box ? "1" : "0") + "," +
         std::to_string(c.success) + "," + std::to_string(c.total) + "," + fixed6(c.asr) + "\n";
  }
  return s;
}

std::string EvalReport::timing_json() const {
  json j = json::array();
  for (const auto& t : timings) j.push_back({{"source", t.source}, {"attack", t.attack}, {"seconds", t.seconds}});
  return j.dump(2) + "\n";
}

std::string EvalReport::table_markdown() const {
  std::string s = "| source | attack |";
  for (const auto& m : models) s += " " + m + " |";
  s += "\n|---|---|";
  for (std::size_t i = 0; i < models.size(); ++i) s += "---|";
  s += "\n";
  for (const auto& src : models) {
    for (const auto& atk : attacks) {
      s += "| " + src + " | " + atk + " |";
      for (const auto& tgt : models) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.1f%s |", 100.0 * cell(src, atk, tgt).asr, src == tgt ? "*" : "");
        s += buf;
      }
      s += "\n";
    }
  }
  return s;
}

template <typename T>
std::vector<Tensor<T>> craft_adversarials(const Network<T>& model, const Dataset& data, std::size_t first,
                                          std::size_t count, const AttackConfig& cfg) {
  check_range(data, first, count);
  cfg.validate();
  std::vector<Tensor<T>> out(count);
  parallel_for(count, [&](std::size_t i) {
    AttackConfig c = cfg;
    c.seed = derive_seed(cfg.seed, first + i);
    out[i] = run_attack(model, data.image<T>(first + i), data.labels[first + i], c).x_adv;
  });
  return out;
}

template <typename T>
EvalReport run_transfer_matrix(const Zoo<T>& zoo, const Dataset& data, const EvalOptions& options) {
  check_range(data, options.first_image, options.images);
  if (zoo.models.empty()) throw ValueError("zoo has no models");
  if (options.attacks.empty()) throw ValueError("no attacks requested");
  options.config.validate();
  for (const Network<T>& m : zoo.models) {
    if (m.input_shape() != data.image_shape()) {
      throw ShapeError("dataset image shape " + shape_str(data.image_shape()) + " does not match model input");
    }
  }

  EvalReport r;
  r.precision = sizeof(T) == 8 ? "f64" : "f32";
  r.sample_count = options.images;
  r.first_image = options.first_image;
  r.config_text = options.config.to_text();
  for (const auto& m : zoo.manifest.models) {
    r.models.push_back(m.name);
    r.source_taps.push_back(options.config.tap.value_or(m.tap));
  }
  for (LossKind k : options.attacks) r.attacks.push_back(loss_kind_name(k));

  const std::vector<Tensor<T>> benign = benign_images<T>(data, options.first_image, options.images);
  std::vector<std::vector<std::size_t>> benign_pred;
  for (const Network<T>& m : zoo.models) {
    benign_pred.push_back(predictions(m, benign));
    r.benign_correct.push_back(tally(benign_pred.back(), benign_pred.back(), data, options.first_image).total);
  }

  for (std::size_t s = 0; s < zoo.models.size(); ++s) {
    for (LossKind kind : options.attacks) {
      AttackConfig cfg = options.config;
      cfg.loss = kind;
      cfg.tap = r.source_taps[s];
      const auto t0 = std::chrono::steady_clock::now();
      const std::vector<Tensor<T>> adv =
          craft_adversarials(zoo.models[s], data, options.first_image, options.images, cfg);
      r.timings.push_back({r.models[s], loss_kind_name(kind),
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      for (std::size_t t = 0; t < zoo.models.size(); ++t) {
        const Tally tl = tally(benign_pred[t], predictions(zoo.models[t], adv), data, options.first_image);
        r.cells.push_back({r.models[s], loss_kind_name(kind), r.models[t], s == t, tl.success, tl.total, tl.asr()});
      }
    }
  }
  return r;
}

std::string ablation_axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::tap_layer: return "tap-layer";
    case AblationAxis::steps_n: return "steps-n";
    case AblationAxis::gamma: return "gamma";
    case AblationAxis::transform_pair: return "transform-pair";
  }
  return "gamma";
}

std::optional<AblationAxis> parse_ablation_axis(std::string_view name) {
  for (auto a : {AblationAxis::tap_layer, AblationAxis::steps_n, AblationAxis::gamma, AblationAxis::transform_pair}) {
    if (ablation_axis_name(a) == name) return a;
  }
  return std::nullopt;
}

std::vector<std::string> default_ablation_grid(AblationAxis axis, const std::vector<std::size_t>& taps) {
  switch (axis) {
    case AblationAxis::tap_layer: {
      std::vector<std::string> g;
      for (std::size_t t : taps) g.push_back(std::to_string(t));
      return g;
    }
    case AblationAxis::steps_n: return {"1", "5", "10", "20", "30"};
    case AblationAxis::gamma: return {"0", "0.5", "1", "2"};
    case AblationAxis::transform_pair: {
      std::vector<std::string> g;
      for (const auto& fp : TransformFn::all()) {
        for (const auto& fn : TransformFn::all()) g.push_back(std::string(fp.name()) + ":" + std::string(fn.name()));
      }
      return g;
    }
  }
  return {};
}

std::string AblationResult::csv() const {
  std::string s = "axis,value,target,success,total,asr\n";
  for (const auto& r : rows) {
    s += ablation_axis_name(axis) + "," + r.value + "," + r.target + "," + std::to_string(r.success) + "," +
         std::to_string(r.total) + "," + fixed6(r.asr) + "\n";
  }
  return s;
}

std::string AblationResult::heatmap_csv() const {
  if (axis != AblationAxis::transform_pair) throw ValueError("heat map needs the transform-pair axis");
  std::map<std::string, std::size_t> targets;
  for (const auto& r : rows) ++targets[r.target];
  const bool any_black_box = targets.size() > 1;
  std::map<std::string, std::pair<double, std::size_t>> mean;
  for (const auto& r : rows) {
    if (any_black_box && r.target == source) continue;
    auto& [sum, n] = mean[r.value];
    sum += r.asr;
    ++n;
  }
  std::string s = "fp\\fn";
  for (const auto& fn : TransformFn::all()) s += "," + std::string(fn.name());
  s += "\n";
  for (const auto& fp : TransformFn::all()) {
    s += std::string(fp.name());
    for (const auto& fn : TransformFn::all()) {
      const auto it = mean.find(std::string(fp.name()) + ":" + std::string(fn.name()));
      s += ",";
      if (it != mean.end() && it->second.second) s += fixed6(it->second.first / static_cast<double>(it->second.second));
    }
    s += "\n";
  }
  return s;
}

template <typename T>
AblationResult run_ablation(const AblationSpec& spec, const Zoo<T>& zoo, const Dataset& data) {
  if (spec.grid.empty()) throw ValueError("ablation grid is empty");
  check_range(data, spec.first_image, spec.images);
  const std::size_t s = zoo.index_of(spec.source);
  const Network<T>& model = zoo.models[s];
  AttackConfig base = spec.base;
  base.loss = LossKind::naa;
  if (!base.tap) base.tap = zoo.manifest.models[s].tap;

  std::vector<AttackConfig> configs;
  for (const std::string& v : spec.grid) {
    AttackConfig c = base;
    switch (spec.axis) {
      case AblationAxis::tap_layer:
        c.set("tap", v);
        if (!c.tap || !model.has_tap(*c.tap)) {
          throw ValueError("tap " + v + " is not valid for model " + spec.source + "; valid taps: " +
                           taps_str(model.taps()));
        }
        break;
      case AblationAxis::steps_n: c.set("steps", v); break;
      case AblationAxis::gamma: c.set("gamma", v); break;
      case AblationAxis::transform_pair: {
        const auto colon = v.find(':');
        if (colon == std::string::npos) throw ConfigError("transform pair '" + v + "' must be written fp:fn");
        c.set("fp", v.substr(0, colon));
        c.set("fn", v.substr(colon + 1));
        break;
      }
    }
    c.validate();
    configs.push_back(c);
  }

  const std::vector<Tensor<T>> benign = benign_images<T>(data, spec.first_image, spec.images);
  std::vector<std::vector<std::size_t>> benign_pred;
  for (const Network<T>& m : zoo.models) benign_pred.push_back(predictions(m, benign));

  AblationResult res;
  res.axis = spec.axis;
  res.source = spec.source;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const auto adv = craft_adversarials(model, data, spec.first_image, spec.images, configs[k]);
    for (std::size_t t = 0; t < zoo.models.size(); ++t) {
      const Tally tl = tally(benign_pred[t], predictions(zoo.models[t], adv), data, spec.first_image);
      res.rows.push_back({spec.grid[k], zoo.manifest.models[t].name, tl.success, tl.total, tl.asr()});
    }
  }
  return res;
}

template EvalReport run_transfer_matrix<float>(const Zoo<float>&, const Dataset&, const EvalOptions&);
template EvalReport run_transfer_matrix<double>(const Zoo<double>&, const Dataset&, const EvalOptions&);
template std::vector<Tensor<float>> craft_adversarials<float>(const Network<float>&, const Dataset&, std::size_t,
                                                              std::size_t, const AttackConfig&);
template std::vector<Tensor<double>> craft_adversarials<double>(const Network<double>&, const Dataset&, std::size_t,
                                                                std::size_t, const AttackConfig&);
template AblationResult run_ablation<float>(const AblationSpec&, const Zoo<float>&, const Dataset&);
template AblationResult run_ablation<double>(const AblationSpec&, const Zoo<double>&, const Dataset&);

}  // namespace naa
