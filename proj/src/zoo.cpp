#include "naa/zoo.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "byte_io.hpp"
#include "json.hpp"
#include "naa/model_io.hpp"
#include "naa/rng.hpp"

namespace naa {
namespace {

using json = nlohmann::ordered_json;

std::vector<std::size_t> all_but_last(std::size_t layer_count) {
  std::vector<std::size_t> taps;
  for (std::size_t i = 0; i + 1 < layer_count; ++i) taps.push_back(i);
  return taps;
}

template <typename T>
Network<T> assemble(std::vector<Layer<T>> layers, std::size_t classes) {
  const std::size_t n = layers.size();
  return Network<T>({3, 32, 32}, std::move(layers), classes, all_but_last(n));
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names{"narrow", "wide5", "deep", "strided"};
  return names;
}

template <typename T>
Network<T> build_architecture(const std::string& name, std::size_t classes) {
  using L = Layer<T>;
  if (name == "narrow") {
    return assemble<T>({L::conv2d(3, 8, 3, 1, 1), L::relu(), L::maxpool2d(2, 2), L::conv2d(8, 16, 3, 1, 1),
                        L::relu(), L::maxpool2d(2, 2), L::flatten(), L::dense(16 * 8 * 8, classes), L::logits()},
                       classes);
  }
  if (name == "wide5") {
    return assemble<T>({L::conv2d(3, 12, 5, 1, 2), L::relu(), L::avgpool2d(2, 2), L::conv2d(12, 16, 3, 1, 1),
                        L::relu(), L::maxpool2d(2, 2), L::flatten(), L::dense(16 * 8 * 8, 32), L::relu(),
                        L::dense(32, classes), L::logits()},
                       classes);
  }
  if (name == "deep") {
    return assemble<T>({L::conv2d(3, 8, 3, 1, 1), L::relu(), L::conv2d(8, 8, 3, 1, 1), L::relu(),
                        L::maxpool2d(2, 2), L::conv2d(8, 16, 3, 1, 1), L::relu(), L::maxpool2d(2, 2), L::flatten(),
                        L::dense(16 * 8 * 8, classes), L::logits()},
                       classes);
  }
  if (name == "strided") {
    return assemble<T>({L::conv2d(3, 16, 4, 2, 1), L::relu(), L::conv2d(16, 16, 3, 1, 1), L::relu(),
                        L::maxpool2d(2, 2), L::flatten(), L::dense(16 * 8 * 8, classes), L::logits()},
                       classes);
  }
  throw ConfigError("unknown architecture '" + name + "'");
}

std::size_t designated_tap(const std::string& name) {
  if (name == "narrow") return 4;
  if (name == "wide5") return 4;
  if (name == "deep") return 4;
  if (name == "strided") return 3;
  throw ConfigError("unknown architecture '" + name + "'");
}

ZooRecipe default_zoo_recipe(std::uint64_t seed) {
  ZooRecipe r;
  std::uint64_t stream = 100;
  for (const std::string& name : architecture_names()) {
    ZooEntry e;
    e.name = name;
    e.seed = derive_seed(seed, stream++);
    e.tap = designated_tap(name);
    e.train.seed = e.seed;
    r.entries.push_back(e);
  }
  return r;
}

template <typename T>
std::size_t Zoo<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < manifest.models.size(); ++i) {
    if (manifest.models[i].name == name) return i;
  }
  throw ConfigError("no model named '" + name + "' in zoo");
}

std::string ZooManifest::to_json() const {
  json j;
  j["format"] = "naa-zoo-manifest";
  j["version"] = 1;
  j["precision"] = precision;
  j["train_checksum"] = train_checksum;
  j["test_checksum"] = test_checksum;
  j["accuracy_floor"] = accuracy_floor;
  j["models"] = json::array();
  for (const auto& m : models) {
    j["models"].push_back({{"name", m.name},
                           {"file", m.file},
                           {"seed", m.seed},
                           {"tap", m.tap},
                           {"valid_taps", m.valid_taps},
                           {"epochs", m.epochs},
                           {"train_accuracy", m.train_accuracy},
                           {"test_accuracy", m.test_accuracy},
                           {"checksum", m.checksum}});
  }
  return j.dump(2) + "\n";
}

ZooManifest ZooManifest::from_json(const std::string& text) {
  ZooManifest z;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "naa-zoo-manifest") throw FormatError("manifest: wrong format tag");
    z.precision = j.at("precision").get<std::string>();
    z.train_checksum = j.at("train_checksum").get<std::string>();
    z.test_checksum = j.at("test_checksum").get<std::string>();
    z.accuracy_floor = j.at("accuracy_floor").get<double>();
    for (const auto& m : j.at("models")) {
      ManifestModel mm;
      mm.name = m.at("name").get<std::string>();
      mm.file = m.at("file").get<std::string>();
      mm.seed = m.at("seed").get<std::uint64_t>();
      mm.tap = m.at("tap").get<std::size_t>();
      mm.valid_taps = m.at("valid_taps").get<std::vector<std::size_t>>();
      mm.epochs = m.at("epochs").get<std::size_t>();
      mm.train_accuracy = m.at("train_accuracy").get<double>();
      mm.test_accuracy = m.at("test_accuracy").get<double>();
      mm.checksum = m.at("checksum").get<std::string>();
      z.models.push_back(std::move(mm));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return z;
}

template <typename T>
Zoo<T> build_zoo(const ZooRecipe& recipe, const SplitDataset& data, const std::optional<std::string>& out_dir) {
  if (data.train.count() == 0 || data.test.count() == 0) {
    throw ValueError("zoo build needs both train and test splits");
  }
  Zoo<T> zoo;
  zoo.manifest.precision = sizeof(T) == 8 ? "f64" : "f32";
  zoo.manifest.train_checksum = hex64(dataset_checksum(data.train));
  zoo.manifest.test_checksum = hex64(dataset_checksum(data.test));
  zoo.manifest.accuracy_floor = recipe.accuracy_floor;
  if (out_dir) std::filesystem::create_directories(*out_dir);
  for (const ZooEntry& e : recipe.entries) {
    Network<T> net = build_architecture<T>(e.name);
    if (!net.has_tap(e.tap)) throw ConfigError("recipe tap " + std::to_string(e.tap) + " invalid for " + e.name);
    init_params(net, e.seed);
    TrainResult<T> trained = sgd_train(std::move(net), data.train, e.train);
    const double test_acc = accuracy(trained.model, data.test);
    if (test_acc < recipe.accuracy_floor) {
      throw Error("zoo build failed: model '" + e.name + "' test accuracy " + std::to_string(test_acc) +
                  " is below the floor " + std::to_string(recipe.accuracy_floor));
    }
    const auto bytes = encode_model(trained.model);
    ManifestModel m;
    m.name = e.name;
    m.file = e.name + ".naam";
    m.seed = e.seed;
    m.tap = e.tap;
    m.valid_taps = trained.model.taps();
    m.epochs = e.train.epochs;
    m.train_accuracy = trained.train_accuracy;
    m.test_accuracy = test_acc;
    m.checksum = hex64(detail::fnv1a(bytes));
    if (out_dir) detail::write_file((std::filesystem::path(*out_dir) / m.file).string(), bytes);
    zoo.manifest.models.push_back(std::move(m));
    zoo.models.push_back(std::move(trained.model));
  }
  if (out_dir) {
    std::ofstream(std::filesystem::path(*out_dir) / "manifest.json") << zoo.manifest.to_json();
  }
  return zoo;
}

template <typename T>
Zoo<T> load_zoo(const std::string& dir) {
  const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("missing zoo manifest: " + manifest_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Zoo<T> zoo;
  zoo.manifest = ZooManifest::from_json(ss.str());
  for (const auto& m : zoo.manifest.models) {
    const auto path = std::filesystem::path(dir) / m.file;
    if (!std::filesystem::exists(path)) throw FormatError("missing model file: " + path.string());
  }
  for (const auto& m : zoo.manifest.models) {
    zoo.models.push_back(read_model<T>((std::filesystem::path(dir) / m.file).string()));
    if (!zoo.models.back().has_tap(m.tap)) {
      throw FormatError("manifest tap " + std::to_string(m.tap) + " is not registered on model " + m.name);
    }
  }
  return zoo;
}

template Network<float> build_architecture<float>(const std::string&, std::size_t);
template Network<double> build_architecture<double>(const std::string&, std::size_t);
template struct Zoo<float>;
template struct Zoo<double>;
template Zoo<float> build_zoo<float>(const ZooRecipe&, const SplitDataset&, const std::optional<std::string>&);
template Zoo<double> build_zoo<double>(const ZooRecipe&, const SplitDataset&, const std::optional<std::string>&);
template Zoo<float> load_zoo<float>(const std::string&);
template Zoo<double> load_zoo<double>(const std::string&);

}  // namespace naa
