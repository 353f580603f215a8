#pragma once

#include <optional>
#include <string>

#include "semfill/encoder.hpp"

namespace semfill {

/// Four upsampling blocks (×2, ×2, ×2, ×1) with skip connections from the
/// encoder, ending in a 1×1 class head and a softmax over classes.
class SemanticDecoderImpl : public torch::nn::Module {
 public:
  SemanticDecoderImpl(const EncoderConfig& enc, int64_t num_classes);

  /// Returns class logits N×K×H×W.
  torch::Tensor logits(const EncoderOutput& enc, const MaskedInput& input);

  /// Disabling skips feeds zeros in their place (diagnostics only).
  void set_use_skips(bool on) { use_skips_ = on; }

 private:
  struct Block {
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    int64_t upsample = 2;
  };
  torch::Tensor run_block(Block& b, torch::Tensor x, const torch::Tensor& skip);

  std::vector<Block> blocks_;
  torch::nn::Conv2d head_{nullptr};
  bool use_skips_ = true;
};
TORCH_MODULE(SemanticDecoder);

struct Stage1Output {
  SemanticMap semantic;
  FeatureMap features;  // F_enc, reused by the texture stage
};

class Stage1Impl : public torch::nn::Module {
 public:
  Stage1Impl(const EncoderConfig& enc, int64_t num_classes);
  Stage1Output forward(const MaskedInput& input);

  HybridEncoder& encoder() { return encoder_; }
  SemanticDecoder& decoder() { return decoder_; }
  int64_t num_classes() const { return num_classes_; }

 private:
  int64_t num_classes_;
  HybridEncoder encoder_{nullptr};
  SemanticDecoder decoder_{nullptr};
};
TORCH_MODULE(Stage1);

/// Where ground-truth layouts for the semantic loss come from.
enum class SemanticProvider { None, ExternalParser, ColorCluster };

SemanticProvider parse_semantic_provider(const std::string& name);
std::string to_string(SemanticProvider provider);

/// N×H×W class indices -> one-hot N×K×H×W. Throws if an index is >= K.
SemanticMap one_hot_labels(const torch::Tensor& labels, int64_t num_classes,
                           torch::ScalarType dtype = torch::kFloat);

/// Clusters pixel colours into K groups (farthest-point seeding, then Lloyd
/// iterations) per image; clusters are ordered by luminance.
torch::Tensor color_cluster_labels(const ImageBatch& image, int64_t num_classes,
                                   int iterations = 20);

/// S_gt for a batch. `labels` holds precomputed label maps when the external
/// parser is configured. Returns nullopt for the None provider. When the
/// external labels are missing, falls back to colour clustering if
/// `fallback_to_cluster`, otherwise throws.
std::optional<SemanticMap> pseudo_semantic_labels(const ImageBatch& image,
                                                  SemanticProvider provider,
                                                  int64_t num_classes,
                                                  const torch::Tensor& labels = {},
                                                  bool fallback_to_cluster = false);

}  // namespace semfill
