// naa: command-line front end for data generation, zoo training, attacks,
// transfer evaluation, ablations and the verification suites.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "naa/attack.hpp"
#include "naa/dataset.hpp"
#include "naa/harness.hpp"
#include "naa/verify.hpp"
#include "naa/zoo.hpp"

namespace fs = std::filesystem;
using namespace naa;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string precision = "f32";
  std::string out;
  bool seed_given = false;
};

// Attack settings from the command line, applied in this order: config
// file, --set pairs, then the dedicated flags.
struct AttackFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> loss, epsilon, gamma, fp, fn, tap;
  std::optional<std::size_t> steps, iterations;
  std::optional<double> momentum;
  bool dim = false, pim = false;
};

void add_attack_flags(CLI::App* sub, AttackFlags& f) {
  sub->add_option("--config", f.config_file, "Attack config file (key = value lines)");
  sub->add_option("--set", f.sets, "Override one config key, key=value (repeatable)");
  sub->add_option("--loss", f.loss, "naa, mim, nrdm, fda or fia");
  sub->add_option("--epsilon", f.epsilon, "L-inf budget in [0,1]; fractions such as 16/255 accepted");
  sub->add_option("--iterations", f.iterations, "Iteration count T");
  sub->add_option("--momentum", f.momentum, "Momentum decay mu");
  sub->add_option("--n", f.steps, "Integrated path steps n");
  sub->add_option("--gamma", f.gamma, "Weight of negative attributions");
  sub->add_option("--fp", f.fp, "Transform for positive attributions");
  sub->add_option("--fn", f.fn, "Transform for negative attributions");
  sub->add_option("--tap", f.tap, "Tap layer index, or auto");
  sub->add_flag("--dim", f.dim, "Enable diverse inputs");
  sub->add_flag("--pim", f.pim, "Enable patch-wise steps");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

AttackConfig build_config(const AttackFlags& f, const Globals& g) {
  AttackConfig cfg = f.config_file.empty() ? AttackConfig{} : AttackConfig::from_text(slurp(f.config_file));
  if (f.config_file.empty() || g.seed_given) cfg.seed = g.seed;
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.loss) cfg.set("loss", *f.loss);
  if (f.epsilon) cfg.set("epsilon", *f.epsilon);
  if (f.iterations) cfg.iterations = *f.iterations;
  if (f.momentum) cfg.momentum = *f.momentum;
  if (f.steps) cfg.steps = *f.steps;
  if (f.gamma) cfg.set("gamma", *f.gamma);
  if (f.fp) cfg.set("fp", *f.fp);
  if (f.fn) cfg.set("fn", *f.fn);
  if (f.tap) cfg.set("tap", *f.tap);
  if (f.dim) cfg.dim.enabled = true;
  if (f.pim) cfg.pim.enabled = true;
  cfg.validate();
  return cfg;
}

// Test split from `<dir>/test.naad`, or regenerated from the seed when no
// directory is given.
Dataset load_test(const std::string& dir, std::uint64_t seed) {
  if (!dir.empty()) return read_dataset((fs::path(dir) / "test.naad").string());
  SyntheticOptions o;
  o.seed = seed;
  o.first_index = 6000;
  o.count = 1000;
  return generate_synthetic(o);
}

SplitDataset load_split(const std::string& dir, std::uint64_t seed) {
  if (dir.empty()) return generate_default_split(seed);
  return {read_dataset((fs::path(dir) / "train.naad").string()), read_dataset((fs::path(dir) / "test.naad").string())};
}

std::string out_dir(const Globals& g, const std::string& fallback) {
  const std::string d = g.out.empty() ? fallback : g.out;
  fs::create_directories(d);
  return d;
}

int cmd_gen_data(const Globals& g, std::size_t train, std::size_t test) {
  const SplitDataset s = generate_default_split(g.seed, train, test);
  const std::string dir = out_dir(g, "data");
  write_dataset(s.train, (fs::path(dir) / "train.naad").string());
  write_dataset(s.test, (fs::path(dir) / "test.naad").string());
  std::printf("train: %zu images, checksum %s\n", s.train.count(), hex64(dataset_checksum(s.train)).c_str());
  std::printf("test:  %zu images, checksum %s\n", s.test.count(), hex64(dataset_checksum(s.test)).c_str());
  return 0;
}

template <typename T>
int cmd_train_zoo(const Globals& g, const std::string& data_dir, std::optional<std::size_t> epochs, double floor) {
  ZooRecipe recipe = default_zoo_recipe(g.seed);
  recipe.accuracy_floor = floor;
  if (epochs) {
    for (auto& e : recipe.entries) e.train.epochs = *epochs;
  }
  const SplitDataset split = load_split(data_dir, g.seed);
  const Zoo<T> zoo = build_zoo<T>(recipe, split, out_dir(g, "zoo"));
  for (const auto& m : zoo.manifest.models) {
    std::printf("%-8s tap %zu  train %.4f  test %.4f  checksum %s\n", m.name.c_str(), m.tap, m.train_accuracy,
                m.test_accuracy, m.checksum.c_str());
  }
  return 0;
}

template <typename T>
int cmd_attack(const Globals& g, const AttackFlags& flags, const std::string& zoo_dir, const std::string& data_dir,
               std::string model_name, std::size_t image, bool dry_run) {
  AttackConfig cfg = build_config(flags, g);
  if (dry_run) {
    std::cout << cfg.to_text();
    return 0;
  }
  if (zoo_dir.empty()) throw ConfigError("attack needs --zoo (or --dry-run to only echo the config)");
  const Zoo<T> zoo = load_zoo<T>(zoo_dir);
  if (model_name.empty()) model_name = zoo.manifest.models.front().name;
  const std::size_t mi = zoo.index_of(model_name);
  if (!cfg.tap && cfg.loss != LossKind::mim_ce) cfg.tap = zoo.manifest.models[mi].tap;
  std::cout << cfg.to_text();

  const Dataset test = load_test(data_dir, g.seed);
  if (image >= test.count()) throw ValueError("image index " + std::to_string(image) + " out of range");
  AttackConfig run_cfg = cfg;
  run_cfg.seed = derive_seed(cfg.seed, image);
  const Tensor<T> x = test.image<T>(image);
  const AdvResult<T> res = run_attack(zoo.models[mi], x, test.labels[image], run_cfg);

  const std::string dir = out_dir(g, "attack-out");
  write_text(fs::path(dir) / "trace.csv", trace_csv(res.trace));
  Dataset adv;
  adv.channels = test.channels;
  adv.height = test.height;
  adv.width = test.width;
  for (T v : res.x_adv.data()) adv.pixels.push_back(static_cast<float>(v));
  adv.labels.push_back(test.labels[image]);
  write_dataset(adv, (fs::path(dir) / "adv.naad").string());

  std::printf("model %s, image %zu, label %u: benign prediction %zu, adversarial prediction %zu\n",
              model_name.c_str(), image, static_cast<unsigned>(test.labels[image]), zoo.models[mi].predict(x),
              res.prediction);
  std::printf("linf %.6f, constraint violation: %s\n", res.trace.empty() ? 0.0 : res.trace.back().linf,
              res.constraint_violation ? "yes" : "no");
  return res.constraint_violation ? 1 : 0;
}

template <typename T>
int cmd_eval(const Globals& g, const AttackFlags& flags, const std::string& zoo_dir, const std::string& data_dir,
             std::size_t images, std::size_t first, const std::vector<std::string>& attacks) {
  const int threads = apply_thread_limit();
  EvalOptions o;
  o.config = build_config(flags, g);
  o.images = images;
  o.first_image = first;
  if (!attacks.empty()) {
    o.attacks.clear();
    for (const auto& a : attacks) {
      const auto k = parse_loss_kind(a);
      if (!k) throw ConfigError("unknown attack '" + a + "'");
      o.attacks.push_back(*k);
    }
  }
  const Zoo<T> zoo = load_zoo<T>(zoo_dir);
  const Dataset test = load_test(data_dir, g.seed);
  const EvalReport r = run_transfer_matrix(zoo, test, o);
  const std::string dir = out_dir(g, "eval-out");
  write_text(fs::path(dir) / "report.json", r.report_json());
  write_text(fs::path(dir) / "matrix.csv", r.matrix_csv());
  write_text(fs::path(dir) / "timing.json", r.timing_json());
  write_text(fs::path(dir) / "table.md", r.table_markdown());
  std::cout << r.table_markdown();
  std::printf("%zu images, %d threads; reports in %s\n", images, threads, dir.c_str());
  return 0;
}

template <typename T>
int cmd_ablate(const Globals& g, const AttackFlags& flags, const std::string& zoo_dir, const std::string& data_dir,
               const std::string& axis, std::vector<std::string> grid, std::string source, std::size_t images) {
  apply_thread_limit();
  const auto ax = parse_ablation_axis(axis);
  if (!ax) throw ConfigError("unknown axis '" + axis + "' (expected tap-layer, steps-n, gamma or transform-pair)");
  const Zoo<T> zoo = load_zoo<T>(zoo_dir);
  if (source.empty()) source = zoo.manifest.models.front().name;
  if (grid.empty()) grid = default_ablation_grid(*ax, zoo.models[zoo.index_of(source)].taps());
  AblationSpec spec;
  spec.axis = *ax;
  spec.grid = grid;
  spec.source = source;
  spec.base = build_config(flags, g);
  spec.images = images;
  const Dataset test = load_test(data_dir, g.seed);
  const AblationResult res = run_ablation(spec, zoo, test);
  const std::string dir = out_dir(g, "ablate-out");
  write_text(fs::path(dir) / ("ablation-" + axis + ".csv"), res.csv());
  std::cout << res.csv();
  if (*ax == AblationAxis::transform_pair) {
    write_text(fs::path(dir) / "heatmap.csv", res.heatmap_csv());
    std::cout << "\n" << res.heatmap_csv();
  }
  return 0;
}

int cmd_verify(const Globals& g, const std::string& fixtures) {
  const auto results = verify::run_all(fixtures, g.precision, g.seed);
  std::string text;
  bool ok = true;
  for (const auto& r : results) {
    text += std::string(r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
    ok = ok && r.passed;
  }
  std::cout << text;
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_text(fs::path(g.out) / "verify.txt", text);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuron attribution-based transfer attacks on a desk-scale model zoo", "naa"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--precision", g.precision, "Scalar precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  app.add_option("--out", g.out, "Output directory");

  std::size_t train_count = 6000, test_count = 1000;
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic train/test splits");
  gen->add_option("--train", train_count)->capture_default_str();
  gen->add_option("--test", test_count)->capture_default_str();

  std::string data_dir, zoo_dir;
  std::optional<std::size_t> epochs;
  double floor = 0.90;
  auto* train = app.add_subcommand("train-zoo", "Train the four-model zoo and write its manifest");
  train->add_option("--data", data_dir, "Directory with train.naad/test.naad (default: regenerate)");
  train->add_option("--epochs", epochs, "Override epochs for every model");
  train->add_option("--floor", floor, "Test accuracy floor")->capture_default_str();

  AttackFlags flags;
  std::string model_name;
  std::size_t image = 0;
  bool dry_run = false;
  auto* attack = app.add_subcommand("attack", "Attack one test image and write its loss trace");
  attack->add_option("--zoo", zoo_dir, "Zoo directory");
  attack->add_option("--data", data_dir, "Data directory (default: regenerate the test split)");
  attack->add_option("--model", model_name, "Source model name (default: first in the manifest)");
  attack->add_option("--image", image, "Test image index")->capture_default_str();
  attack->add_flag("--dry-run", dry_run, "Only echo the resolved config");
  add_attack_flags(attack, flags);

  std::size_t images = 200, first = 0;
  std::vector<std::string> attacks;
  auto* eval = app.add_subcommand("eval", "Source x attack x target transfer matrix");
  eval->add_option("--zoo", zoo_dir, "Zoo directory")->required();
  eval->add_option("--data", data_dir, "Data directory (default: regenerate the test split)");
  eval->add_option("--images", images, "Evaluation image count")->capture_default_str();
  eval->add_option("--first", first, "First test image index")->capture_default_str();
  eval->add_option("--attacks", attacks, "Attack kinds (default: all five)")->delimiter(',');
  add_attack_flags(eval, flags);

  std::string axis, source;
  std::vector<std::string> grid;
  auto* ablate = app.add_subcommand("ablate", "NAA ablation over one axis");
  ablate->add_option("--zoo", zoo_dir, "Zoo directory")->required();
  ablate->add_option("--data", data_dir, "Data directory (default: regenerate the test split)");
  ablate->add_option("--axis", axis, "tap-layer, steps-n, gamma or transform-pair")->required();
  ablate->add_option("--grid", grid, "Comma-separated values (default: per-axis grid)")->delimiter(',');
  ablate->add_option("--source", source, "Source model (default: first in the manifest)");
  ablate->add_option("--images", images, "Evaluation image count")->capture_default_str();
  add_attack_flags(ablate, flags);

  std::string fixtures = NAA_FIXTURE_DIR;
  auto* verify = app.add_subcommand("verify", "Run the gradient and attribution oracle suites");
  verify->add_option("--fixtures", fixtures, "Fixture directory")->capture_default_str();

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;
  const bool f64 = g.precision == "f64";

  try {
    if (*gen) return cmd_gen_data(g, train_count, test_count);
    if (*train) {
      return f64 ? cmd_train_zoo<double>(g, data_dir, epochs, floor) : cmd_train_zoo<float>(g, data_dir, epochs, floor);
    }
    if (*attack) {
      return f64 ? cmd_attack<double>(g, flags, zoo_dir, data_dir, model_name, image, dry_run)
                 : cmd_attack<float>(g, flags, zoo_dir, data_dir, model_name, image, dry_run);
    }
    if (*eval) {
      return f64 ? cmd_eval<double>(g, flags, zoo_dir, data_dir, images, first, attacks)
                 : cmd_eval<float>(g, flags, zoo_dir, data_dir, images, first, attacks);
    }
    if (*ablate) {
      return f64 ? cmd_ablate<double>(g, flags, zoo_dir, data_dir, axis, grid, source, images)
                 : cmd_ablate<float>(g, flags, zoo_dir, data_dir, axis, grid, source, images);
    }
    if (*verify) return cmd_verify(g, fixtures);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
