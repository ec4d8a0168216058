#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "naa/attack.hpp"
#include "naa/dataset.hpp"
#include "naa/zoo.hpp"

namespace naa {

/// Applies NAA_THREADS (if set to a positive integer) as the OpenMP thread
/// cap and returns the resulting maximum thread count.
int apply_thread_limit();

struct MatrixCell {
  std::string source;
  std::string attack;
  std::string target;
  bool white_box = false;
  std::size_t success = 0;  // adversarials the target misclassifies
  std::size_t total = 0;    // images the target classifies correctly when benign
  double asr = 0.0;
};

struct AttackTiming {
  std::string source;
  std::string attack;
  double seconds = 0.0;
};

/// Result of a transfer-matrix run. `report_json` and `matrix_csv` depend
/// only on the inputs; wall-clock timings live in `timing_json`.
struct EvalReport {
  std::string precision;
  std::size_t sample_count = 0;
  std::size_t first_image = 0;
  std::string config_text;  // AttackConfig::to_text of the shared settings
  std::vector<std::string> models;
  std::vector<std::size_t> source_taps;
  std::vector<std::string> attacks;
  std::vector<std::size_t> benign_correct;  // per target model
  std::vector<MatrixCell> cells;
  std::vector<AttackTiming> timings;

  const MatrixCell& cell(const std::string& source, const std::string& attack, const std::string& target) const;

  std::string report_json() const;
  /// Header: source,attack,target,white_box,success,total,asr
  std::string matrix_csv() const;
  std::string timing_json() const;
  /// Source/attack rows by target columns, ASR in percent.
  std::string table_markdown() const;
};

struct EvalOptions {
  std::vector<LossKind> attacks = all_loss_kinds();
  std::size_t images = 200;
  std::size_t first_image = 0;
  /// Shared settings. An unset tap means each source's designated tap.
  AttackConfig config;
};

/// For each source model and attack, crafts adversarials for the selected
/// test images and evaluates every model in the zoo. Image i of the run
/// uses attack seed derive_seed(config.seed, i).
template <typename T>
EvalReport run_transfer_matrix(const Zoo<T>& zoo, const Dataset& data, const EvalOptions& options);

/// Crafts adversarials for images [first, first + count) in parallel.
template <typename T>
std::vector<Tensor<T>> craft_adversarials(const Network<T>& model, const Dataset& data, std::size_t first,
                                          std::size_t count, const AttackConfig& cfg);

enum class AblationAxis { tap_layer, steps_n, gamma, transform_pair };

std::string ablation_axis_name(AblationAxis axis);
std::optional<AblationAxis> parse_ablation_axis(std::string_view name);

/// Default grid per axis: every tap of the source model, n in {1,5,10,20,30},
/// gamma in {0,0.5,1,2}, or all 25 transform pairs written "fp:fn".
std::vector<std::string> default_ablation_grid(AblationAxis axis, const std::vector<std::size_t>& taps);

struct AblationSpec {
  AblationAxis axis = AblationAxis::gamma;
  std::vector<std::string> grid;
  std::string source;
  /// Fixed remainder of the attack settings; the loss is always NAA.
  AttackConfig base;
  std::size_t images = 200;
  std::size_t first_image = 0;
};

struct AblationRow {
  std::string value;
  std::string target;
  std::size_t success = 0;
  std::size_t total = 0;
  double asr = 0.0;
};

struct AblationResult {
  AblationAxis axis = AblationAxis::gamma;
  std::string source;
  std::vector<AblationRow> rows;

  /// Header: axis,value,target,success,total,asr
  std::string csv() const;
  /// Transform-pair axis only: rows fp, columns fn, cells the mean ASR over
  /// the black-box targets (over all targets when the zoo has one model).
  std::string heatmap_csv() const;
};

/// Validates the grid against the source model before any attack runs.
template <typename T>
AblationResult run_ablation(const AblationSpec& spec, const Zoo<T>& zoo, const Dataset& data);

}  // namespace naa
