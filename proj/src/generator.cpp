#include "semfill/generator.hpp"

#include "semfill/core_data.hpp"

namespace semfill {

TextureConfig GeneratorConfig::texture() const {
  TextureConfig t;
  t.image_size = encoder.image_size;
  t.feature_channels = encoder.fused_width();
  t.num_classes = num_classes;
  t.semantic_channels = semantic_channels;
  t.attention = attention;
  t.noise = noise;
  return t;
}

InpaintGeneratorImpl::InpaintGeneratorImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  stage1_ = register_module("stage1", Stage1(cfg_.encoder, cfg_.num_classes));
  stage2_ = register_module("stage2", TextureGenerator(cfg_.texture()));
}

GeneratorOutput InpaintGeneratorImpl::forward(const MaskedInput& input, double sigma,
                                              std::optional<at::Generator> gen) {
  auto s1 = stage1_->forward(input);
  auto pred = stage2_->forward(s1.semantic, s1.features, input.mask, sigma, gen);
  return GeneratorOutput{s1.semantic, s1.features, pred};
}

ImageBatch InpaintGeneratorImpl::inpaint(const ImageBatch& image, const MaskBatch& mask,
                                         double sigma, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto dtype = stage2_->parameters().front().scalar_type();
  ImageBatch img(image.data().to(dtype));
  MaskBatch m(mask.data().to(dtype));
  auto out = forward(make_masked_input(img, m), sigma, make_generator(seed));
  return composite(img, out.prediction, m);
}

}  // namespace semfill
