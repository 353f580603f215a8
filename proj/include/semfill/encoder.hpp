#pragma once

#include <string>

#include "semfill/types.hpp"

namespace semfill {

enum class EncoderMode { CnnOnly, VitOnly, Hybrid };

EncoderMode parse_encoder_mode(const std::string& name);
std::string to_string(EncoderMode mode);

struct EncoderConfig {
  int64_t image_size = 128;
  int64_t base_channels = 64;
  int64_t vit_layers = 2;
  int64_t vit_heads = 4;
  int64_t vit_dim = 128;
  int64_t patch_size = 8;
  /// Width of the fused feature map; 0 means 4 × base_channels.
  int64_t fused_channels = 0;
  EncoderMode mode = EncoderMode::Hybrid;

  int64_t fused_width() const { return fused_channels > 0 ? fused_channels : 4 * base_channels; }
  void validate() const;
};

/// Stride-2 residual block: two 3×3 convs with a strided 1×1 shortcut.
class ResidualDownBlockImpl : public torch::nn::Module {
 public:
  ResidualDownBlockImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(ResidualDownBlock);

/// CNN branch outputs, finest first. `out` is at 1/8 scale.
struct CnnFeatures {
  torch::Tensor stem;    // full resolution, base channels
  torch::Tensor half;    // 1/2, base channels
  torch::Tensor quarter; // 1/4, 2·base channels
  FeatureMap out;        // 1/8, 4·base channels
};

class CnnBranchImpl : public torch::nn::Module {
 public:
  explicit CnnBranchImpl(const EncoderConfig& cfg);
  CnnFeatures forward(const MaskedInput& input);

 private:
  torch::nn::Conv2d stem_{nullptr};
  ResidualDownBlock down1_{nullptr}, down2_{nullptr}, down3_{nullptr};
};
TORCH_MODULE(CnnBranch);

/// Pre-norm transformer block over a token sequence N×T×D.
class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int64_t dim, int64_t heads);
  torch::Tensor forward(const torch::Tensor& tokens);

 private:
  int64_t heads_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TransformerBlock);

class VitBranchImpl : public torch::nn::Module {
 public:
  explicit VitBranchImpl(const EncoderConfig& cfg);

  /// Patch tokens after the transformer stack, N×T×D.
  torch::Tensor tokens(const MaskedInput& input);
  /// Tokens reshaped onto the patch grid, N×D×g×g at 1/patch scale.
  FeatureMap forward(const MaskedInput& input);

  torch::Tensor& positional_embedding() { return pos_embed_; }
  int64_t grid() const { return grid_; }

 private:
  int64_t grid_;
  int64_t patch_;
  torch::nn::Conv2d patch_embed_{nullptr};
  torch::Tensor pos_embed_;
  torch::nn::ModuleList blocks_;
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(VitBranch);

struct EncoderOutput {
  FeatureMap fused;  // F_enc at 1/8 scale
  /// Decoder skip features (full, 1/2, 1/4). Zero tensors in vit-only mode.
  torch::Tensor skip_full, skip_half, skip_quarter;
};

/// Dual-branch encoder. Both branches are always constructed so every
/// ablation mode shares one parameter layout; only the active ones run.
class HybridEncoderImpl : public torch::nn::Module {
 public:
  explicit HybridEncoderImpl(const EncoderConfig& cfg);

  EncoderOutput forward(const MaskedInput& input);

  /// Concatenate (upsampling the ViT grid bilinearly to the CNN grid) and
  /// project with the 1×1 convolution. Either input may be undefined
  /// according to the mode.
  FeatureMap fuse(const FeatureMap* cnn, const FeatureMap* vit);

  const EncoderConfig& config() const { return cfg_; }
  CnnBranch& cnn() { return cnn_; }
  VitBranch& vit() { return vit_; }

 private:
  EncoderConfig cfg_;
  CnnBranch cnn_{nullptr};
  VitBranch vit_{nullptr};
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(HybridEncoder);

}  // namespace semfill
