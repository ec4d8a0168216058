#include "naa/attack.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "naa/train.hpp"

namespace naa {
namespace {

constexpr double kL1Floor = 1e-12;
constexpr double kNormFloor = 1e-12;

template <typename T>
T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Accepts plain decimals and "a/b" fractions such as 16/255.
double parse_double(const std::string& key, const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    return parse_double(key, trim(text.substr(0, slash))) / parse_double(key, trim(text.substr(slash + 1)));
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid number '" + text + "' for key '" + key + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid unsigned integer '" + text + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for key '" + key + "'");
}

TransformFn parse_transform(const std::string& key, const std::string& text) {
  const auto t = TransformFn::parse(text);
  if (!t) throw ConfigError("unknown transform '" + text + "' for key '" + key + "'");
  return *t;
}

std::string taps_str(const std::vector<std::size_t>& taps) {
  std::string s;
  for (std::size_t i = 0; i < taps.size(); ++i) s += (i ? "," : "") + std::to_string(taps[i]);
  return s;
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::naa: return "naa";
    case LossKind::mim_ce: return "mim";
    case LossKind::nrdm: return "nrdm";
    case LossKind::fda: return "fda";
    case LossKind::fia: return "fia";
  }
  return "naa";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  if (name == "mim-ce") return LossKind::mim_ce;
  for (LossKind k : all_loss_kinds()) {
    if (loss_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

const std::vector<LossKind>& all_loss_kinds() {
  static const std::vector<LossKind> kinds{LossKind::mim_ce, LossKind::nrdm, LossKind::fda, LossKind::fia,
                                           LossKind::naa};
  return kinds;
}

const std::vector<std::string>& attack_config_keys() {
  static const std::vector<std::string> keys{
      "epsilon",    "iterations",    "momentum",         "loss",        "tap",
      "steps",      "gamma",         "fp",               "fn",          "dim.enabled",
      "dim.probability", "dim.resize_low", "dim.resize_high", "pim.enabled", "pim.amplification",
      "pim.kernel", "fia.drop",      "fia.ensemble",     "seed"};
  return keys;
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1], got " + fmt_double(epsilon));
  if (iterations == 0) throw ConfigError("iterations must be at least 1");
  if (!(momentum >= 0.0 && std::isfinite(momentum))) throw ConfigError("momentum must be finite and >= 0");
  if (steps == 0) throw ConfigError("path steps n must be at least 1");
  if (!(gamma >= 0.0 && std::isfinite(gamma))) throw ConfigError("gamma must be finite and >= 0");
  if (dim.enabled) {
    if (!(dim.probability >= 0.0 && dim.probability <= 1.0)) throw ConfigError("dim.probability must lie in [0,1]");
    if (!(dim.resize_low > 0.0 && dim.resize_low <= dim.resize_high && dim.resize_high <= 2.0)) {
      throw ConfigError("dim resize bounds must satisfy 0 < low <= high <= 2");
    }
  }
  if (pim.enabled) {
    if (pim.kernel % 2 == 0) throw ConfigError("pim.kernel must be odd, got " + std::to_string(pim.kernel));
    if (!(pim.amplification > 0.0 && std::isfinite(pim.amplification))) {
      throw ConfigError("pim.amplification must be positive");
    }
  }
  if (loss == LossKind::fia) {
    if (fia_ensemble == 0) throw ConfigError("fia.ensemble must be at least 1");
    if (!(fia_drop >= 0.0 && fia_drop < 1.0)) throw ConfigError("fia.drop must lie in [0,1)");
  }
}

std::string AttackConfig::to_text() const {
  std::ostringstream o;
  o << "# alpha = epsilon / iterations = " << fmt_double(alpha()) << "\n";
  o << "epsilon = " << fmt_double(epsilon) << "\n";
  o << "iterations = " << iterations << "\n";
  o << "momentum = " << fmt_double(momentum) << "\n";
  o << "loss = " << loss_kind_name(loss) << "\n";
  o << "tap = " << (tap ? std::to_string(*tap) : std::string("auto")) << "\n";
  o << "steps = " << steps << "\n";
  o << "gamma = " << fmt_double(gamma) << "\n";
  o << "fp = " << fp.name() << "\n";
  o << "fn = " << fn.name() << "\n";
  o << "dim.enabled = " << (dim.enabled ? "true" : "false") << "\n";
  o << "dim.probability = " << fmt_double(dim.probability) << "\n";
  o << "dim.resize_low = " << fmt_double(dim.resize_low) << "\n";
  o << "dim.resize_high = " << fmt_double(dim.resize_high) << "\n";
  o << "pim.enabled = " << (pim.enabled ? "true" : "false") << "\n";
  o << "pim.amplification = " << fmt_double(pim.amplification) << "\n";
  o << "pim.kernel = " << pim.kernel << "\n";
  o << "fia.drop = " << fmt_double(fia_drop) << "\n";
  o << "fia.ensemble = " << fia_ensemble << "\n";
  o << "seed = " << seed << "\n";
  return o.str();
}

void AttackConfig::set(const std::string& key, const std::string& value) {
  if (key == "epsilon") epsilon = parse_double(key, value);
  else if (key == "iterations") iterations = parse_uint(key, value);
  else if (key == "momentum") momentum = parse_double(key, value);
  else if (key == "loss") {
    const auto k = parse_loss_kind(value);
    if (!k) throw ConfigError("unknown loss '" + value + "' (expected naa, mim, nrdm, fda or fia)");
    loss = *k;
  } else if (key == "tap") {
    if (value == "auto") tap.reset();
    else tap = parse_uint(key, value);
  } else if (key == "steps") steps = parse_uint(key, value);
  else if (key == "gamma") gamma = parse_double(key, value);
  else if (key == "fp") fp = parse_transform(key, value);
  else if (key == "fn") fn = parse_transform(key, value);
  else if (key == "dim.enabled") dim.enabled = parse_bool(key, value);
  else if (key == "dim.probability") dim.probability = parse_double(key, value);
  else if (key == "dim.resize_low") dim.resize_low = parse_double(key, value);
  else if (key == "dim.resize_high") dim.resize_high = parse_double(key, value);
  else if (key == "pim.enabled") pim.enabled = parse_bool(key, value);
  else if (key == "pim.amplification") pim.amplification = parse_double(key, value);
  else if (key == "pim.kernel") pim.kernel = parse_uint(key, value);
  else if (key == "fia.drop") fia_drop = parse_double(key, value);
  else if (key == "fia.ensemble") fia_ensemble = parse_uint(key, value);
  else if (key == "seed") seed = parse_uint(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

AttackConfig AttackConfig::from_text(const std::string& text) {
  AttackConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

template <typename T>
T weighted_attribution(std::span<const T> values, double gamma, const TransformFn& fp, const TransformFn& fn) {
  if (!(gamma >= 0.0)) throw ValueError("gamma must be >= 0");
  const T g = static_cast<T>(gamma);
  std::vector<T> terms(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    const T a = values[j];
    terms[j] = a >= T(0) ? fp.apply(a) : -(g * fn.apply(-a));
  }
  return pairwise_sum<T>(terms);
}

template <typename T>
Tensor<T> weighted_attribution_grad(const Tensor<T>& values, double gamma, const TransformFn& fp,
                                    const TransformFn& fn) {
  const T g = static_cast<T>(gamma);
  Tensor<T> d(values.shape());
  for (std::size_t j = 0; j < values.size(); ++j) {
    const T a = values[j];
    d[j] = a >= T(0) ? fp.derivative(a) : g * fn.derivative(-a);
  }
  return d;
}

template <typename T>
NaaObjective<T>::NaaObjective(std::size_t tap, Tensor<T> y_baseline, Tensor<T> ia, double gamma, TransformFn fp,
                              TransformFn fn)
    : tap_(tap), y_baseline_(std::move(y_baseline)), ia_(std::move(ia)), gamma_(gamma), fp_(fp), fn_(fn) {
  if (y_baseline_.shape() != ia_.shape()) throw ShapeError("baseline activation and IA shapes differ");
}

template <typename T>
LossEval<T> NaaObjective<T>::evaluate(const Tensor<T>& y) const {
  Tensor<T> a(y.shape());
  for (std::size_t j = 0; j < y.size(); ++j) a[j] = (y[j] - y_baseline_[j]) * ia_[j];
  LossEval<T> ev;
  ev.value = weighted_attribution<T>(a.data(), gamma_, fp_, fn_);
  ev.grad = weighted_attribution_grad(a, gamma_, fp_, fn_);
  for (std::size_t j = 0; j < y.size(); ++j) ev.grad[j] *= ia_[j];
  ev.attribution_sum = pairwise_sum<T>(a.data());
  return ev;
}

template <typename T>
LossEval<T> MimObjective<T>::evaluate(const Tensor<T>& logits) const {
  LossAndGrad<T> ce = softmax_cross_entropy(logits, label_);
  LossEval<T> ev;
  ev.value = -ce.loss;
  ev.grad = std::move(ce.grad);
  for (T& v : ev.grad.data()) v = -v;
  return ev;
}

template <typename T>
LossEval<T> NrdmObjective<T>::evaluate(const Tensor<T>& y) const {
  Tensor<T> d(y.shape());
  std::vector<T> sq(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    d[j] = y[j] - benign_[j];
    sq[j] = d[j] * d[j];
  }
  const T norm = std::sqrt(pairwise_sum<T>(sq));
  LossEval<T> ev;
  ev.value = -norm;
  ev.grad = Tensor<T>(y.shape());
  if (norm > T(0)) {
    for (std::size_t j = 0; j < y.size(); ++j) ev.grad[j] = -d[j] / norm;
  }
  return ev;
}

template <typename T>
FdaObjective<T>::FdaObjective(std::size_t tap, const Tensor<T>& y_benign) : tap_(tap) {
  const std::size_t channels = y_benign.rank() == 3 ? y_benign.shape()[0] : 1;
  channel_size_ = y_benign.size() / channels;
  means_.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    means_[c] = pairwise_sum<T>(y_benign.data().subspan(c * channel_size_, channel_size_)) /
                static_cast<T>(channel_size_);
  }
}

template <typename T>
LossEval<T> FdaObjective<T>::evaluate(const Tensor<T>& y) const {
  std::vector<T> pos(y.size(), T(0)), neg(y.size(), T(0));
  for (std::size_t j = 0; j < y.size(); ++j) {
    const bool positive = y[j] >= means_[j / channel_size_];
    (positive ? pos : neg)[j] = y[j] * y[j];
  }
  const T sp = pairwise_sum<T>(pos), sn = pairwise_sum<T>(neg);
  const T np = std::sqrt(sp), nn = std::sqrt(sn);
  const T floor = static_cast<T>(kNormFloor);
  LossEval<T> ev;
  ev.value = std::log(std::max(np, floor)) - std::log(std::max(nn, floor));
  ev.grad = Tensor<T>(y.shape());
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] >= means_[j / channel_size_]) {
      if (np > floor) ev.grad[j] = y[j] / sp;
    } else if (nn > floor) {
      ev.grad[j] = -y[j] / sn;
    }
  }
  return ev;
}

template <typename T>
LossEval<T> FiaObjective<T>::evaluate(const Tensor<T>& y) const {
  LossEval<T> ev;
  std::vector<T> terms(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) terms[j] = weights_[j] * y[j];
  ev.value = pairwise_sum<T>(terms);
  ev.grad = weights_;
  return ev;
}

template <typename T>
Tensor<T> fia_weights(const Network<T>& model, const Tensor<T>& x, std::size_t label, std::size_t tap, double drop,
                      std::size_t ensemble, Rng& rng) {
  if (ensemble == 0) throw ConfigError("FIA needs an ensemble of at least one masked copy");
  if (!(drop >= 0.0 && drop < 1.0)) throw ConfigError("FIA drop probability must lie in [0,1)");
  Tensor<T> w(model.activation_shape(tap));
  Tensor<T> seed({model.class_count()});
  seed[label] = T(1);
  for (std::size_t m = 0; m < ensemble; ++m) {
    Tensor<T> masked = x;
    for (T& v : masked.data()) {
      if (rng.bernoulli(drop)) v = T(0);
    }
    const Trace<T> tr = model.trace(masked);
    const Tensor<T> g = model.pullback(tr, model.layer_count(), seed, tap + 1);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += g[j];
  }
  const T inv = T(1) / static_cast<T>(ensemble);
  for (T& v : w.data()) v *= inv;
  return w;
}

template <typename T>
std::unique_ptr<Objective<T>> make_objective(const Network<T>& model, const Tensor<T>& x, std::size_t label,
                                             const AttackConfig& cfg, std::size_t tap, Rng& rng,
                                             AttackStats& stats) {
  if (label >= model.class_count()) throw ValueError("label " + std::to_string(label) + " >= class_count");
  if (cfg.loss == LossKind::mim_ce) return std::make_unique<MimObjective<T>>(model.layer_count(), label);
  if (!model.has_tap(tap)) {
    throw ValueError("layer " + std::to_string(tap) + " is not a valid tap; valid taps: " + taps_str(model.taps()));
  }
  switch (cfg.loss) {
    case LossKind::naa: {
      const PathSpec<T> path = PathSpec<T>::black(x.shape(), cfg.steps);
      IntegratedAttention<T> ia = integrated_attention(model, x, path, tap, label);
      ++stats.ia_computations;
      stats.ia_backward_passes += ia.backward_passes;
      Tensor<T> yb = model.trace(path.baseline, tap + 1).acts[tap + 1];
      return std::make_unique<NaaObjective<T>>(tap, std::move(yb), std::move(ia.values), cfg.gamma, cfg.fp, cfg.fn);
    }
    case LossKind::nrdm:
      return std::make_unique<NrdmObjective<T>>(tap, model.trace(x, tap + 1).acts[tap + 1]);
    case LossKind::fda:
      return std::make_unique<FdaObjective<T>>(tap, model.trace(x, tap + 1).acts[tap + 1]);
    case LossKind::fia:
      return std::make_unique<FiaObjective<T>>(
          tap, fia_weights(model, x, label, tap, cfg.fia_drop, cfg.fia_ensemble, rng));
    case LossKind::mim_ce: break;
  }
  throw ConfigError("unhandled loss kind");
}

template <typename T>
AdvResult<T> optimize(const Network<T>& model, const Tensor<T>& x, const Tensor<T>& start, std::size_t label,
                      const AttackConfig& cfg, const Objective<T>& objective, Rng& rng, AttackStats stats,
                      const IterateObserver<T>& observer) {
  cfg.validate();
  if (start.shape() != x.shape()) throw ShapeError("attack start point shape differs from the input");
  const double alpha = cfg.alpha();
  stats.alpha = alpha;
  stats.momentum = cfg.momentum;
  const T eps = static_cast<T>(cfg.epsilon);
  const T step = static_cast<T>(alpha);
  const T mu = static_cast<T>(cfg.momentum);
  const T l1_floor = static_cast<T>(kL1Floor);

  Tensor<T> lo(x.shape()), hi(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] = std::max(x[i] - eps, T(0));
    hi[i] = std::min(x[i] + eps, T(1));
  }
  AdvResult<T> res;
  res.x_adv = start;
  for (std::size_t i = 0; i < x.size(); ++i) res.x_adv[i] = std::clamp(res.x_adv[i], lo[i], hi[i]);
  Tensor<T> g(x.shape()), dir(x.shape()), amplification(x.shape());
  const std::size_t act = objective.read_act();

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (observer) observer(t, res.x_adv);
    DiverseInput d{x.shape(), {}};
    if (cfg.dim.enabled) d = sample_dim(x.shape(), cfg.dim, rng);
    const Trace<T> tr = model.trace(d.apply(res.x_adv), act);
    LossEval<T> ev = objective.evaluate(tr.acts[act]);
    if (!std::isfinite(ev.value)) {
      throw DivergenceError("attack loss became non-finite at iteration " + std::to_string(t));
    }
    const Tensor<T> grad = d.adjoint(model.pullback(tr, act, std::move(ev.grad), 0));

    std::vector<T> mags(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) mags[i] = std::abs(grad[i]);
    const T scale = T(1) / std::max(pairwise_sum<T>(mags), l1_floor);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = mu * g[i] + grad[i] * scale;
      dir[i] = -sign_of(g[i]);
    }
    if (cfg.pim.enabled) {
      const Tensor<T> inc = pim_step(dir, alpha, cfg.pim, cfg.epsilon, amplification);
      for (std::size_t i = 0; i < x.size(); ++i) res.x_adv[i] = std::clamp(res.x_adv[i] + inc[i], lo[i], hi[i]);
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) {
        res.x_adv[i] = std::clamp(res.x_adv[i] + step * dir[i], lo[i], hi[i]);
      }
    }
    ++stats.optimizer_steps;

    IterationRecord rec;
    rec.iter = t;
    rec.loss = static_cast<double>(ev.value);
    double linf = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      linf = std::max(linf, std::abs(static_cast<double>(res.x_adv[i]) - static_cast<double>(x[i])));
    }
    rec.linf = linf;
    if (ev.attribution_sum) rec.attribution_sum = static_cast<double>(*ev.attribution_sum);
    res.trace.push_back(rec);
  }
  res.prediction = model.predict(res.x_adv);
  res.benign_correct = model.predict(x) == label;
  res.constraint_violation = !within_budget(res.x_adv, x, cfg.epsilon);
  res.stats = stats;
  return res;
}

template <typename T>
AdvResult<T> run_attack(const Network<T>& model, const Tensor<T>& x, std::size_t label, const AttackConfig& cfg,
                        const IterateObserver<T>& observer) {
  cfg.validate();
  if (cfg.loss != LossKind::mim_ce && !cfg.tap) {
    throw ConfigError("loss '" + loss_kind_name(cfg.loss) + "' needs a tap layer; valid taps: " +
                      taps_str(model.taps()));
  }
  Rng rng(cfg.seed);
  AttackStats stats;
  const auto objective = make_objective(model, x, label, cfg, cfg.tap.value_or(0), rng, stats);
  Tensor<T> start = x;
  if (cfg.loss == LossKind::nrdm) {
    // The distortion gradient vanishes at x itself, so start inside the first step.
    for (T& v : start.data()) v += static_cast<T>(rng.uniform(-cfg.alpha(), cfg.alpha()));
  }
  return optimize(model, x, start, label, cfg, *objective, rng, stats, observer);
}

template <typename T>
AdvResult<T> naa_attack(const Network<T>& model, const Tensor<T>& x, std::size_t label, AttackConfig cfg) {
  cfg.loss = LossKind::naa;
  return run_attack(model, x, label, cfg);
}

template <typename T>
bool within_budget(const Tensor<T>& x_adv, const Tensor<T>& x, double epsilon) {
  if (x_adv.shape() != x.shape()) return false;
  const double bound = epsilon + static_cast<double>(std::numeric_limits<T>::epsilon());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = static_cast<double>(x_adv[i]);
    if (!(a >= 0.0 && a <= 1.0)) return false;
    if (std::abs(a - static_cast<double>(x[i])) > bound) return false;
  }
  return true;
}

std::string trace_csv(const std::vector<IterationRecord>& trace) {
  std::string s = "iter,loss,linf\n";
  for (const auto& r : trace) s += std::to_string(r.iter) + "," + fmt_double(r.loss) + "," + fmt_double(r.linf) + "\n";
  return s;
}

#define NAA_INSTANTIATE(T)                                                                                       \
  template T weighted_attribution<T>(std::span<const T>, double, const TransformFn&, const TransformFn&);       \
  template Tensor<T> weighted_attribution_grad<T>(const Tensor<T>&, double, const TransformFn&,                 \
                                                  const TransformFn&);                                          \
  template class NaaObjective<T>;                                                                                \
  template class MimObjective<T>;                                                                                \
  template class NrdmObjective<T>;                                                                               \
  template class FdaObjective<T>;                                                                                \
  template class FiaObjective<T>;                                                                                \
  template Tensor<T> fia_weights<T>(const Network<T>&, const Tensor<T>&, std::size_t, std::size_t, double,     \
                                    std::size_t, Rng&);                                                          \
  template std::unique_ptr<Objective<T>> make_objective<T>(const Network<T>&, const Tensor<T>&, std::size_t,     \
                                                           const AttackConfig&, std::size_t, Rng&,               \
                                                           AttackStats&);                                        \
  template AdvResult<T> optimize<T>(const Network<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,          \
                                    const AttackConfig&, const Objective<T>&, Rng&, AttackStats,                 \
                                    const IterateObserver<T>&);                                                  \
  template AdvResult<T> run_attack<T>(const Network<T>&, const Tensor<T>&, std::size_t, const AttackConfig&,     \
                                      const IterateObserver<T>&);                                                \
  template AdvResult<T> naa_attack<T>(const Network<T>&, const Tensor<T>&, std::size_t, AttackConfig);           \
  template bool within_budget<T>(const Tensor<T>&, const Tensor<T>&, double);

NAA_INSTANTIATE(float)
NAA_INSTANTIATE(double)
#undef NAA_INSTANTIATE

}  // namespace naa
