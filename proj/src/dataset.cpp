#include "semfill/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "semfill/image_io.hpp"
#include "semfill/log.hpp"

namespace fs = std::filesystem;

namespace semfill {

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  throw Error("unknown split '" + name + "' (expected train or val)");
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "val"; }

namespace {

bool is_image_ext(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<std::string> list_image_files(const fs::path& root, Split split) {
  std::vector<std::string> files;
  const fs::path manifest = root / (to_string(split) + ".txt");
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    for (std::string line; std::getline(in, line);) {
      line = trim(line);
      if (!line.empty() && line[0] != '#') files.push_back(line);
    }
    return files;
  }
  const fs::path dir = root / to_string(split);
  if (!fs::is_directory(dir)) {
    throw Error("dataset split directory not found: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_ext(entry.path())) {
      files.push_back(fs::relative(entry.path(), root).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

Dataset Dataset::load(const DatasetOptions& options) {
  if (options.resolution < 32) throw Error("dataset resolution must be >= 32");
  std::vector<Sample> samples;
  for (const auto& rel : list_image_files(options.root, options.split)) {
    Sample s;
    s.name = rel;
    try {
      s.image = rgb_to_tensor(resize_rgb(read_rgb(options.root / rel), options.resolution))[0];
    } catch (const Error& e) {
      log::warn("skipping unreadable image ", rel, ": ", e.what());
      continue;
    }
    if (options.load_labels) {
      const fs::path label_path = options.root / "labels" / rel;
      if (fs::exists(label_path)) {
        s.labels = read_label_png(label_path, options.resolution);
      } else {
        log::warn("no label map for ", rel);
      }
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw Error("dataset is empty: " + (options.root / to_string(options.split)).string());
  }
  return from_samples(std::move(samples), options.resolution);
}

Dataset Dataset::from_samples(std::vector<Sample> samples, int resolution) {
  Dataset d;
  d.samples_ = std::move(samples);
  d.resolution_ = resolution;
  return d;
}

Batch Dataset::gather(const std::vector<int64_t>& indices) const {
  Batch b;
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> labels;
  bool all_labels = true;
  for (auto i : indices) {
    const Sample& s = (*this)[i];
    images.push_back(s.image);
    if (s.labels.defined()) {
      labels.push_back(s.labels);
    } else {
      all_labels = false;
    }
    b.names.push_back(s.name);
  }
  b.images = ImageBatch(torch::stack(images));
  if (all_labels && !labels.empty()) b.labels = torch::stack(labels);
  b.indices = indices;
  return b;
}

std::vector<Batch> Dataset::batches(int64_t batch_size,
                                    std::optional<uint64_t> shuffle_seed) const {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  std::vector<int64_t> order(static_cast<size_t>(size()));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));
    out.push_back(gather({order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(stop)}));
  }
  return out;
}

}  // namespace semfill
