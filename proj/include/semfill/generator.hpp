#pragma once

#include "semfill/texture.hpp"

namespace semfill {

struct GeneratorConfig {
  EncoderConfig encoder;
  int64_t num_classes = 20;
  int64_t semantic_channels = 32;
  AttentionConfig attention;
  NoiseConfig noise;

  int64_t image_size() const { return encoder.image_size; }
  TextureConfig texture() const;
};

struct GeneratorOutput {
  SemanticMap semantic;
  FeatureMap features;
  ImageBatch prediction;  // raw Î before compositing
};

/// Semantic layout stage followed by the texture stage.
class InpaintGeneratorImpl : public torch::nn::Module {
 public:
  explicit InpaintGeneratorImpl(const GeneratorConfig& cfg);

  GeneratorOutput forward(const MaskedInput& input, double sigma,
                          std::optional<at::Generator> gen = std::nullopt);

  /// Masks `image`, runs both stages with a fresh generator seeded by `seed`
  /// and composites the prediction into the known pixels.
  ImageBatch inpaint(const ImageBatch& image, const MaskBatch& mask, double sigma, uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  Stage1& stage1() { return stage1_; }
  TextureGenerator& stage2() { return stage2_; }

 private:
  GeneratorConfig cfg_;
  Stage1 stage1_{nullptr};
  TextureGenerator stage2_{nullptr};
};
TORCH_MODULE(InpaintGenerator);

}  // namespace semfill
