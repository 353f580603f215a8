#pragma once

#include <ATen/core/Generator.h>

#include <optional>
#include <vector>

#include "semfill/semantic.hpp"

namespace semfill {

struct AttentionConfig {
  bool enabled = true;
  std::vector<int64_t> scales = {1, 2, 4};
  int64_t key_dim = 64;
  /// Zero only hole→hole pairs via A ⊙ (1 − M Mᵀ), without renormalising,
  /// instead of masking every missing key.
  bool hole_pairs_only = false;

  void validate(int64_t feature_resolution) const;
};

struct NoiseConfig {
  double sigma = 0.1;
  double alpha_init = 0.01;
};

/// Masked scaled dot-product attention between a feature map and itself
/// (or a separate key/value map). Missing keys receive zero weight and rows
/// are renormalised; when a sample has no known key, every query returns the
/// value projection of a learned global context token.
class ContextualAttentionImpl : public torch::nn::Module {
 public:
  ContextualAttentionImpl(int64_t channels, int64_t key_dim, bool hole_pairs_only = false);

  struct Result {
    torch::Tensor output;   // N×C×h×w
    torch::Tensor weights;  // N×L×L attention (query rows)
  };

  /// `mask` is N×1×h×w at the feature resolution, 1 = missing.
  Result attend(const torch::Tensor& query_features, const torch::Tensor& key_features,
                const MaskBatch& mask);
  torch::Tensor forward(const torch::Tensor& features, const MaskBatch& mask);

  torch::Tensor& global_token() { return global_token_; }

 private:
  int64_t key_dim_;
  bool hole_pairs_only_;
  torch::nn::Conv2d query_{nullptr}, key_{nullptr}, value_{nullptr};
  torch::Tensor global_token_;
};
TORCH_MODULE(ContextualAttention);

/// Bilinearly upsample every per-scale output to the first (finest) one's
/// size and sum.
torch::Tensor aggregate_attention(const std::vector<torch::Tensor>& per_scale_outputs);

/// Attention at each configured scale s over F average-pooled by s, with the
/// full-resolution mask max-pooled down to that grid.
class MultiScaleAttentionImpl : public torch::nn::Module {
 public:
  MultiScaleAttentionImpl(int64_t channels, const AttentionConfig& cfg);
  torch::Tensor forward(const FeatureMap& features, const MaskBatch& full_mask);

  const std::vector<int64_t>& scales() const { return scales_; }
  ContextualAttention& at_scale(size_t i) { return heads_[i]; }

 private:
  std::vector<int64_t> scales_;
  std::vector<ContextualAttention> heads_;
};
TORCH_MODULE(MultiScaleAttention);

/// feat + α·ε with ε ~ N(0, σ²) drawn from `gen`. σ = 0 returns `feat`.
torch::Tensor inject_noise(const torch::Tensor& feat, double sigma, const torch::Tensor& alpha,
                           std::optional<at::Generator> gen);

/// Noise injection followed by a 3×3 convolution, with a learnable α.
class NoisyConvImpl : public torch::nn::Module {
 public:
  NoisyConvImpl(int64_t in_channels, int64_t out_channels, double alpha_init);
  torch::Tensor forward(const torch::Tensor& x, double sigma, std::optional<at::Generator> gen);
  torch::Tensor& alpha() { return alpha_; }

 private:
  torch::Tensor alpha_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(NoisyConv);

struct TextureConfig {
  int64_t image_size = 128;
  int64_t feature_channels = 256;
  int64_t num_classes = 20;
  int64_t semantic_channels = 32;
  AttentionConfig attention;
  NoiseConfig noise;
};

/// Î = tanh(decoder(S, F_enc, M)).
class TextureGeneratorImpl : public torch::nn::Module {
 public:
  explicit TextureGeneratorImpl(const TextureConfig& cfg);

  ImageBatch forward(const SemanticMap& semantic, const FeatureMap& enc, const MaskBatch& mask,
                     double sigma, std::optional<at::Generator> gen);

  const TextureConfig& config() const { return cfg_; }
  MultiScaleAttention& attention() { return attention_; }
  std::vector<NoisyConv>& layers() { return layers_; }

 private:
  TextureConfig cfg_;
  torch::nn::Conv2d semantic_proj_{nullptr};
  MultiScaleAttention attention_{nullptr};
  std::vector<NoisyConv> layers_;
};
TORCH_MODULE(TextureGenerator);

at::Generator make_generator(uint64_t seed);

}  // namespace semfill
