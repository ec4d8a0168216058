#pragma once

// Feature-level transfer attacks sharing one momentum sign-gradient optimizer.
//
// Every loss is minimized. Losses that naturally increase with attack
// strength (cross-entropy, feature distortion) are negated before they reach
// the optimizer.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "naa/attribution.hpp"
#include "naa/network.hpp"
#include "naa/transforms.hpp"

namespace naa {

enum class LossKind { naa, mim_ce, nrdm, fda, fia };

std::string loss_kind_name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
const std::vector<LossKind>& all_loss_kinds();

struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  std::size_t iterations = 10;
  double momentum = 1.0;
  LossKind loss = LossKind::naa;
  /// Layer index of the feature tap; unset means "use the model's designated tap".
  std::optional<std::size_t> tap;
  std::size_t steps = 30;
  double gamma = 1.0;
  TransformFn fp;
  TransformFn fn;
  DimParams dim;
  PimParams pim;
  double fia_drop = 0.3;
  std::size_t fia_ensemble = 30;
  std::uint64_t seed = 0;

  double alpha() const { return epsilon / static_cast<double>(iterations); }

  /// Throws ConfigError on the first violated constraint.
  void validate() const;

  /// Flat `key = value` text, one key per line, in a fixed order. The derived
  /// step size is written as a comment.
  std::string to_text() const;

  /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
  /// unknown keys and malformed values are ConfigErrors naming the line.
  static AttackConfig from_text(const std::string& text);

  /// Sets one key from its textual value.
  void set(const std::string& key, const std::string& value);

  bool operator==(const AttackConfig&) const = default;
};

/// Stable config-file keys, in the order `to_text` writes them.
const std::vector<std::string>& attack_config_keys();

/// WA = sum_{A>=0} fp(A) - gamma * sum_{A<0} fn(-A), summed pairwise.
template <typename T>
T weighted_attribution(std::span<const T> values, double gamma, const TransformFn& fp, const TransformFn& fn);

template <typename T>
T weighted_attribution(const AttributionField<T>& field, double gamma, const TransformFn& fp, const TransformFn& fn) {
  return weighted_attribution<T>(field.values.data(), gamma, fp, fn);
}

/// dWA/dA elementwise.
template <typename T>
Tensor<T> weighted_attribution_grad(const Tensor<T>& values, double gamma, const TransformFn& fp,
                                    const TransformFn& fn);

template <typename T>
struct LossEval {
  T value = T(0);
  Tensor<T> grad;  // d value / d activation at `Objective::read_act`
  /// Plain sum of the factorized attribution field (NAA only).
  std::optional<T> attribution_sum;
};

/// A scalar function of one activation, with reference data fixed at construction.
template <typename T>
class Objective {
 public:
  virtual ~Objective() = default;
  /// Index into Trace::acts that the loss reads.
  virtual std::size_t read_act() const = 0;
  virtual LossEval<T> evaluate(const Tensor<T>& act) const = 0;
};

/// Minimized NAA objective WA over (y - y') ⊙ IA.
template <typename T>
class NaaObjective final : public Objective<T> {
 public:
  NaaObjective(std::size_t tap, Tensor<T> y_baseline, Tensor<T> ia, double gamma, TransformFn fp, TransformFn fn);
  std::size_t read_act() const override { return tap_ + 1; }
  LossEval<T> evaluate(const Tensor<T>& y) const override;
  const Tensor<T>& ia() const { return ia_; }

 private:
  std::size_t tap_;
  Tensor<T> y_baseline_;
  Tensor<T> ia_;
  double gamma_;
  TransformFn fp_, fn_;
};

/// -crossentropy(logits, label).
template <typename T>
class MimObjective final : public Objective<T> {
 public:
  MimObjective(std::size_t logits_act, std::size_t label) : act_(logits_act), label_(label) {}
  std::size_t read_act() const override { return act_; }
  LossEval<T> evaluate(const Tensor<T>& logits) const override;

 private:
  std::size_t act_, label_;
};

/// -||y - y_benign||_2.
template <typename T>
class NrdmObjective final : public Objective<T> {
 public:
  NrdmObjective(std::size_t tap, Tensor<T> y_benign) : tap_(tap), benign_(std::move(y_benign)) {}
  std::size_t read_act() const override { return tap_ + 1; }
  LossEval<T> evaluate(const Tensor<T>& y) const override;

 private:
  std::size_t tap_;
  Tensor<T> benign_;
};

/// log||y ⊙ [y >= mu_c]||_2 - log||y ⊙ [y < mu_c]||_2 with mu_c the benign
/// per-channel mean (one mean for rank-1 taps). Norms are floored at 1e-12.
template <typename T>
class FdaObjective final : public Objective<T> {
 public:
  FdaObjective(std::size_t tap, const Tensor<T>& y_benign);
  std::size_t read_act() const override { return tap_ + 1; }
  LossEval<T> evaluate(const Tensor<T>& y) const override;
  const std::vector<T>& channel_means() const { return means_; }

 private:
  std::size_t tap_;
  std::size_t channel_size_;
  std::vector<T> means_;
};

/// sum(w ⊙ y) with fixed weights w.
template <typename T>
class FiaObjective final : public Objective<T> {
 public:
  FiaObjective(std::size_t tap, Tensor<T> weights) : tap_(tap), weights_(std::move(weights)) {}
  std::size_t read_act() const override { return tap_ + 1; }
  LossEval<T> evaluate(const Tensor<T>& y) const override;
  const Tensor<T>& weights() const { return weights_; }

 private:
  std::size_t tap_;
  Tensor<T> weights_;
};

/// Mean tap gradient of logit[label] over `ensemble` copies of x, each pixel
/// element zeroed independently with probability `drop`.
template <typename T>
Tensor<T> fia_weights(const Network<T>& model, const Tensor<T>& x, std::size_t label, std::size_t tap, double drop,
                      std::size_t ensemble, Rng& rng);

struct AttackStats {
  std::size_t ia_computations = 0;
  std::size_t ia_backward_passes = 0;
  std::size_t optimizer_steps = 0;
  double alpha = 0.0;
  double momentum = 0.0;
};

struct IterationRecord {
  std::size_t iter = 0;
  double loss = 0.0;  // objective at x_t, before the step
  double linf = 0.0;  // ||x_{t+1} - x||_inf, after the step
  std::optional<double> attribution_sum;
};

template <typename T>
struct AdvResult {
  Tensor<T> x_adv;
  std::vector<IterationRecord> trace;
  std::size_t prediction = 0;
  bool benign_correct = false;
  bool constraint_violation = false;
  AttackStats stats;
};

/// Builds the objective for `cfg.loss`; precomputes IA, y', benign
/// activations or FIA weights as needed and records it in `stats`.
template <typename T>
std::unique_ptr<Objective<T>> make_objective(const Network<T>& model, const Tensor<T>& x, std::size_t label,
                                             const AttackConfig& cfg, std::size_t tap, Rng& rng, AttackStats& stats);

/// Called with (t, x_t) before iteration t evaluates the objective.
template <typename T>
using IterateObserver = std::function<void(std::size_t, const Tensor<T>&)>;

/// The shared optimizer, started from `start` (clipped into the ball): for t
/// in 0..T-1, evaluate the objective at the (optionally DIM-transformed)
/// iterate, pull its gradient back to the input,
/// g = mu*g + grad/max(||grad||_1, 1e-12), step by -alpha*sign(g) (or the
/// PIM increment), and clip to the eps-ball intersected with [0,1].
template <typename T>
AdvResult<T> optimize(const Network<T>& model, const Tensor<T>& x, const Tensor<T>& start, std::size_t label,
                      const AttackConfig& cfg, const Objective<T>& objective, Rng& rng, AttackStats stats = {},
                      const IterateObserver<T>& observer = {});

/// Runs the attack named by `cfg.loss`. `cfg.tap` must be set for feature
/// losses. NRDM starts from a seeded uniform draw in [-alpha, alpha] around x.
template <typename T>
AdvResult<T> run_attack(const Network<T>& model, const Tensor<T>& x, std::size_t label, const AttackConfig& cfg,
                        const IterateObserver<T>& observer = {});

/// NAA: `run_attack` with the loss forced to NAA.
template <typename T>
AdvResult<T> naa_attack(const Network<T>& model, const Tensor<T>& x, std::size_t label, AttackConfig cfg);

/// True when |x_adv - x| <= eps + machine epsilon of T everywhere and x_adv
/// lies in [0,1]. Differences are taken in double.
template <typename T>
bool within_budget(const Tensor<T>& x_adv, const Tensor<T>& x, double epsilon);

/// CSV with header `iter,loss,linf`.
std::string trace_csv(const std::vector<IterationRecord>& trace);

}  // namespace naa
