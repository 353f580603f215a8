#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include "semfill/config.hpp"
#include "semfill/feature_extractor.hpp"
#include "semfill/types.hpp"

namespace semfill::testing {

inline ImageBatch random_image(int64_t n, int64_t size, uint64_t seed) {
  torch::manual_seed(seed);
  return ImageBatch(torch::rand({n, 3, size, size}) * 2 - 1);
}

/// Square hole of side `side` with its top-left corner at (top, left).
inline MaskBatch square_hole(int64_t n, int64_t size, int64_t top, int64_t left, int64_t side) {
  auto m = torch::zeros({n, 1, size, size});
  m.index_put_({torch::indexing::Slice(), torch::indexing::Slice(),
                torch::indexing::Slice(top, top + side), torch::indexing::Slice(left, left + side)},
               1.0);
  return MaskBatch(m);
}

inline MaskBatch centre_hole(int64_t n, int64_t size) {
  return square_hole(n, size, size / 4, size / 4, size / 2);
}

/// Small generator for fast tests: widths 8, one ViT layer, four classes.
inline GeneratorConfig tiny_generator(int64_t size, EncoderMode mode = EncoderMode::Hybrid) {
  GeneratorConfig g;
  g.encoder.image_size = size;
  g.encoder.base_channels = 8;
  g.encoder.vit_layers = 1;
  g.encoder.vit_heads = 2;
  g.encoder.vit_dim = 16;
  g.encoder.patch_size = 8;
  g.encoder.mode = mode;
  g.num_classes = 4;
  g.semantic_channels = 8;
  g.attention.key_dim = 8;
  g.attention.scales = {1};
  return g;
}

/// Run config on the bundled smoke data at `size`, small widths, stub
/// perceptual features and no files written.
inline RunConfig tiny_run(int size = 32) {
  RunConfig cfg;
  cfg.workspace = SEMFILL_CONFIG_DIR;
  cfg.seed = 11;
  cfg.data.root = std::string(SEMFILL_DATA_DIR) + "/smoke";
  cfg.data.resolution = size;
  cfg.data.fixed_masks = true;
  cfg.generator = tiny_generator(size);
  cfg.generator.num_classes = 8;
  cfg.generator.attention.scales = {1, 2};
  cfg.critic_channels = 8;
  cfg.semantic.provider = SemanticProvider::ExternalParser;
  cfg.losses.perceptual = "identity";
  cfg.train.epochs = 1;
  cfg.train.batch_size = 2;
  cfg.train.g_lr = 1e-3;
  cfg.train.d_lr = 5e-4;
  cfg.train.run_dir = "";
  cfg.eval.batch_size = 4;
  cfg.finalize();
  return cfg;
}

inline std::shared_ptr<FeatureExtractor> stub_perceptual() {
  return make_perceptual_extractor("identity", {}, false);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("semfill_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

}  // namespace semfill::testing
