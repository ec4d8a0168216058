#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "naa/dataset.hpp"
#include "naa/network.hpp"
#include "naa/train.hpp"

namespace naa {

/// Names of the four built-in architectures: "narrow", "wide5", "deep", "strided".
const std::vector<std::string>& architecture_names();

/// Uninitialized network of the named architecture for 3x32x32 inputs and 10
/// classes. Every non-final layer is registered as a tap.
template <typename T>
Network<T> build_architecture(const std::string& name, std::size_t classes = 10);

/// Middle tap (layer index) used as the default attack layer.
std::size_t designated_tap(const std::string& name);

struct ZooEntry {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t tap = 0;
  TrainOptions train;
};

struct ZooRecipe {
  std::vector<ZooEntry> entries;
  double accuracy_floor = 0.90;
};

ZooRecipe default_zoo_recipe(std::uint64_t seed = 0);

struct ManifestModel {
  std::string name;
  std::string file;
  std::uint64_t seed = 0;
  std::size_t tap = 0;
  std::vector<std::size_t> valid_taps;
  std::size_t epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::string checksum;  // FNV-1a of the NAAM bytes, hex
};

struct ZooManifest {
  std::string precision;
  std::string train_checksum;
  std::string test_checksum;
  double accuracy_floor = 0.0;
  std::vector<ManifestModel> models;

  std::string to_json() const;
  static ZooManifest from_json(const std::string& text);
};

template <typename T>
struct Zoo {
  std::vector<Network<T>> models;
  ZooManifest manifest;

  std::size_t index_of(const std::string& name) const;
};

/// Trains every recipe entry; throws Error naming the first model whose test
/// accuracy falls below the floor. When `out_dir` is given, writes
/// `<name>.naam` files and `manifest.json` there.
template <typename T>
Zoo<T> build_zoo(const ZooRecipe& recipe, const SplitDataset& data,
                 const std::optional<std::string>& out_dir = std::nullopt);

/// Loads manifest.json and every model file it names; a missing model file
/// is reported by path before anything else happens.
template <typename T>
Zoo<T> load_zoo(const std::string& dir);

std::string hex64(std::uint64_t v);

}  // namespace naa
