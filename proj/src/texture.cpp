#include "semfill/texture.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cmath>

#include "semfill/core_data.hpp"

namespace semfill {

namespace F = torch::nn::functional;

at::Generator make_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

void AttentionConfig::validate(int64_t feature_resolution) const {
  if (scales.empty()) throw Error("attention: scale set is empty");
  if (!std::is_sorted(scales.begin(), scales.end()) ||
      std::adjacent_find(scales.begin(), scales.end()) != scales.end()) {
    throw Error("attention: scales must be strictly ascending");
  }
  for (auto s : scales) {
    if (s < 1 || feature_resolution % s != 0) {
      throw Error("attention: scale " + std::to_string(s) + " does not divide feature resolution " +
                  std::to_string(feature_resolution));
    }
  }
  if (key_dim < 1) throw Error("attention: key_dim must be positive");
}

ContextualAttentionImpl::ContextualAttentionImpl(int64_t channels, int64_t key_dim, bool hole_pairs_only)
    : key_dim_(key_dim), hole_pairs_only_(hole_pairs_only) {
  query_ = register_module("query", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, key_dim, 1)));
  key_ = register_module("key", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, key_dim, 1)));
  value_ = register_module("value", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 1)));
  global_token_ = register_parameter("global_token", torch::randn({1, channels, 1, 1}) * 0.02);
}

ContextualAttentionImpl::Result ContextualAttentionImpl::attend(const torch::Tensor& query_features,
                                                                const torch::Tensor& key_features,
                                                                const MaskBatch& mask) {
  check_same_spatial(query_features, key_features, "contextual_attention");
  check_same_spatial(query_features, mask.data(), "contextual_attention");
  const int64_t n = query_features.size(0), c = query_features.size(1);
  const int64_t h = query_features.size(2), w = query_features.size(3);

  auto q = query_(query_features).flatten(2);  // N×dk×L
  auto k = key_(key_features).flatten(2);
  auto v = value_(key_features).flatten(2);    // N×C×L
  auto logits = torch::bmm(q.transpose(1, 2), k) / std::sqrt(static_cast<double>(key_dim_));

  auto missing = (mask.data().flatten(1) > 0.5);  // N×L
  torch::Tensor weights;
  torch::Tensor has_known;
  if (hole_pairs_only_) {
    auto m = missing.to(logits.dtype());
    auto pair = m.unsqueeze(2) * m.unsqueeze(1);  // M_s ⊗ M_sᵀ
    weights = torch::softmax(logits, -1) * (1.0 - pair);
  } else {
    has_known = (~missing).any(1).view({n, 1, 1});
    auto masked = logits.masked_fill(missing.unsqueeze(1), -std::numeric_limits<double>::infinity());
    // samples without any known key take the fallback below; keep softmax finite for them
    masked = torch::where(has_known, masked, torch::zeros_like(logits));
    weights = torch::softmax(masked, -1);
    weights = torch::where(has_known, weights, torch::zeros_like(weights));
  }

  auto out = torch::bmm(v, weights.transpose(1, 2));  // N×C×L
  if (!hole_pairs_only_) {
    auto token = value_(global_token_.to(query_features.dtype())).view({1, c, 1});
    out = torch::where(has_known, out, token.expand({n, c, h * w}));
  }
  return Result{out.view({n, c, h, w}), weights};
}

torch::Tensor ContextualAttentionImpl::forward(const torch::Tensor& features, const MaskBatch& mask) {
  return attend(features, features, mask).output;
}

torch::Tensor aggregate_attention(const std::vector<torch::Tensor>& per_scale_outputs) {
  if (per_scale_outputs.empty()) throw Error("aggregate_attention: no per-scale outputs");
  const auto& finest = per_scale_outputs.front();
  const std::vector<int64_t> size = {finest.size(2), finest.size(3)};
  torch::Tensor sum = finest;
  for (size_t i = 1; i < per_scale_outputs.size(); ++i) {
    auto up = F::interpolate(per_scale_outputs[i], F::InterpolateFuncOptions()
                                                       .size(size)
                                                       .mode(torch::kBilinear)
                                                       .align_corners(false));
    sum = sum + up;
  }
  return sum;
}

MultiScaleAttentionImpl::MultiScaleAttentionImpl(int64_t channels, const AttentionConfig& cfg)
    : scales_(cfg.scales) {
  if (scales_.empty()) throw Error("attention: scale set is empty");
  for (auto s : scales_) {
    heads_.push_back(register_module("scale" + std::to_string(s),
                                     ContextualAttention(channels, cfg.key_dim, cfg.hole_pairs_only)));
  }
}

torch::Tensor MultiScaleAttentionImpl::forward(const FeatureMap& features, const MaskBatch& full_mask) {
  std::vector<torch::Tensor> outs;
  for (size_t i = 0; i < scales_.size(); ++i) {
    const int64_t s = scales_[i];
    auto fs = s == 1 ? features.data : torch::avg_pool2d(features.data, {s, s}, {s, s});
    const int64_t factor = full_mask.height() / fs.size(2);
    auto ms = downsample_mask(full_mask, factor);
    outs.push_back(heads_[i]->forward(fs, MaskBatch(ms.data().to(fs.dtype()))));
  }
  return aggregate_attention(outs);
}

torch::Tensor inject_noise(const torch::Tensor& feat, double sigma, const torch::Tensor& alpha,
                           std::optional<at::Generator> gen) {
  if (sigma == 0.0) return feat;
  auto eps = torch::randn(feat.sizes(), gen, feat.options().requires_grad(false)) * sigma;
  return feat + alpha * eps;
}

NoisyConvImpl::NoisyConvImpl(int64_t in_channels, int64_t out_channels, double alpha_init) {
  alpha_ = register_parameter("alpha", torch::full({1}, alpha_init));
  conv_ = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
}

torch::Tensor NoisyConvImpl::forward(const torch::Tensor& x, double sigma, std::optional<at::Generator> gen) {
  return conv_(inject_noise(x, sigma, alpha_, gen));
}

TextureGeneratorImpl::TextureGeneratorImpl(const TextureConfig& cfg) : cfg_(cfg) {
  const int64_t fr = cfg_.image_size / 8;
  if (cfg_.attention.enabled) cfg_.attention.validate(fr);
  semantic_proj_ = register_module(
      "semantic_proj",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.num_classes, cfg_.semantic_channels, 1)));
  if (cfg_.attention.enabled) {
    attention_ = register_module("attention", MultiScaleAttention(cfg_.feature_channels, cfg_.attention));
  }
  const int64_t fch = cfg_.feature_channels;
  int64_t in = fch + cfg_.semantic_channels + 1;
  int64_t out = fch;
  const double a0 = cfg_.noise.alpha_init;
  layers_.push_back(register_module("layer0", NoisyConv(in, out, a0)));
  for (int i = 1; i <= 3; ++i) {
    in = out + 1;
    out = std::max<int64_t>(8, fch >> i);
    layers_.push_back(register_module("layer" + std::to_string(i), NoisyConv(in, out, a0)));
  }
  layers_.push_back(register_module("layer4", NoisyConv(out, 3, a0)));
}

ImageBatch TextureGeneratorImpl::forward(const SemanticMap& semantic, const FeatureMap& enc,
                                         const MaskBatch& mask, double sigma,
                                         std::optional<at::Generator> gen) {
  if (sigma < 0.0) throw Error("noise sigma must be >= 0");
  if (semantic.classes() != cfg_.num_classes) throw ShapeError("texture: semantic class count mismatch");
  const auto dtype = enc.data.scalar_type();
  const MaskBatch m(mask.data().to(dtype));

  torch::Tensor x = enc.data;
  if (cfg_.attention.enabled) x = x + attention_->forward(enc, m);

  auto sem = semantic_proj_(semantic.data());
  const int64_t fr = enc.data.size(2);
  const int64_t down = semantic.data().size(2) / fr;
  auto sem_coarse = torch::avg_pool2d(sem, {down, down}, {down, down});
  auto mask_coarse = downsample_mask(m, m.height() / fr).data();

  x = torch::gelu(layers_[0]->forward(torch::cat({x, sem_coarse, mask_coarse}, 1), sigma, gen));
  for (size_t i = 1; i <= 3; ++i) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    auto mk = downsample_mask(m, m.height() / x.size(2)).data();
    x = torch::gelu(layers_[i]->forward(torch::cat({x, mk}, 1), sigma, gen));
  }
  return ImageBatch(torch::tanh(layers_[4]->forward(x, sigma, gen)));
}

}  // namespace semfill
