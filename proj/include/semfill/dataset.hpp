#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semfill/types.hpp"

namespace semfill {

enum class Split { Train, Val };

Split parse_split(const std::string& name);
std::string to_string(Split split);

struct DatasetOptions {
  std::filesystem::path root;
  Split split = Split::Train;
  int resolution = 128;
  /// Also read label maps from <root>/labels/<relative path>.
  bool load_labels = false;
};

struct Sample {
  std::string name;     // path relative to the dataset root
  torch::Tensor image;  // 3×H×W in [-1, 1]
  torch::Tensor labels; // H×W int64 class indices; undefined when absent
};

struct Batch {
  ImageBatch images;
  torch::Tensor labels;  // N×H×W int64, defined only if every sample has labels
  std::vector<std::string> names;
  std::vector<int64_t> indices;  // positions in the dataset
};

/// In-memory image set. The file list comes from the manifest
/// <root>/<split>.txt (newline-delimited relative paths) when present,
/// otherwise from the sorted contents of <root>/<split>/.
class Dataset {
 public:
  static Dataset load(const DatasetOptions& options);
  static Dataset from_samples(std::vector<Sample> samples, int resolution);

  int64_t size() const { return static_cast<int64_t>(samples_.size()); }
  int resolution() const { return resolution_; }
  const Sample& operator[](int64_t i) const { return samples_.at(static_cast<size_t>(i)); }

  /// Consecutive batches; the last may be short. With a shuffle seed the
  /// order is a seeded permutation, otherwise file order.
  std::vector<Batch> batches(int64_t batch_size,
                             std::optional<uint64_t> shuffle_seed = std::nullopt) const;

  Batch gather(const std::vector<int64_t>& indices) const;

 private:
  std::vector<Sample> samples_;
  int resolution_ = 0;
};

std::vector<std::string> list_image_files(const std::filesystem::path& root, Split split);

}  // namespace semfill
