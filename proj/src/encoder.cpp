#include "semfill/encoder.hpp"

#include <cmath>

namespace semfill {

namespace F = torch::nn::functional;

EncoderMode parse_encoder_mode(const std::string& name) {
  if (name == "cnn_only") return EncoderMode::CnnOnly;
  if (name == "vit_only") return EncoderMode::VitOnly;
  if (name == "hybrid") return EncoderMode::Hybrid;
  throw Error("unknown encoder mode '" + name + "' (expected cnn_only, vit_only or hybrid)");
}

std::string to_string(EncoderMode mode) {
  switch (mode) {
    case EncoderMode::CnnOnly: return "cnn_only";
    case EncoderMode::VitOnly: return "vit_only";
    case EncoderMode::Hybrid: return "hybrid";
  }
  return "hybrid";
}

void EncoderConfig::validate() const {
  if (image_size % 8 != 0) throw Error("encoder: image size must be divisible by 8");
  if (patch_size < 1 || image_size % patch_size != 0) {
    throw Error("encoder: image size must be divisible by the patch size");
  }
  if (vit_heads < 1 || vit_dim % vit_heads != 0) {
    throw Error("encoder: vit_dim must be divisible by vit_heads");
  }
  if (base_channels < 1 || vit_layers < 0) throw Error("encoder: invalid widths");
}

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

}  // namespace

ResidualDownBlockImpl::ResidualDownBlockImpl(int64_t in_channels, int64_t out_channels) {
  conv1_ = register_module("conv1", conv3x3(in_channels, out_channels, 2));
  conv2_ = register_module("conv2", conv3x3(out_channels, out_channels));
  shortcut_ = register_module(
      "shortcut",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).stride(2)));
}

torch::Tensor ResidualDownBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv2_(torch::gelu(conv1_(x)));
  return torch::gelu(y + shortcut_(x));
}

CnnBranchImpl::CnnBranchImpl(const EncoderConfig& cfg) {
  const int64_t b = cfg.base_channels;
  stem_ = register_module("stem", conv3x3(4, b));
  down1_ = register_module("down1", ResidualDownBlock(b, b));
  down2_ = register_module("down2", ResidualDownBlock(b, 2 * b));
  down3_ = register_module("down3", ResidualDownBlock(2 * b, 4 * b));
}

CnnFeatures CnnBranchImpl::forward(const MaskedInput& input) {
  CnnFeatures f;
  f.stem = torch::gelu(stem_(input.network_input()));
  f.half = down1_(f.stem);
  f.quarter = down2_(f.half);
  f.out = FeatureMap{down3_(f.quarter), 8};
  return f;
}

TransformerBlockImpl::TransformerBlockImpl(int64_t dim, int64_t heads) : heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1_ = register_module("fc1", torch::nn::Linear(dim, 4 * dim));
  fc2_ = register_module("fc2", torch::nn::Linear(4 * dim, dim));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& tokens) {
  const int64_t n = tokens.size(0), t = tokens.size(1), d = tokens.size(2);
  const int64_t hd = d / heads_;

  auto qkv = qkv_(norm1_(tokens)).view({n, t, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];  // N×heads×T×hd
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)), -1);
  auto mixed = torch::matmul(attn, v).permute({0, 2, 1, 3}).reshape({n, t, d});
  auto x = tokens + proj_(mixed);
  return x + fc2_(torch::gelu(fc1_(norm2_(x))));
}

VitBranchImpl::VitBranchImpl(const EncoderConfig& cfg)
    : grid_(cfg.image_size / cfg.patch_size), patch_(cfg.patch_size) {
  patch_embed_ = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(4, cfg.vit_dim, cfg.patch_size).stride(cfg.patch_size)));
  pos_embed_ = register_parameter("pos_embed", torch::randn({1, grid_ * grid_, cfg.vit_dim}) * 0.02);
  for (int64_t i = 0; i < cfg.vit_layers; ++i) {
    blocks_->push_back(TransformerBlock(cfg.vit_dim, cfg.vit_heads));
  }
  register_module("blocks", blocks_);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.vit_dim})));
}

torch::Tensor VitBranchImpl::tokens(const MaskedInput& input) {
  auto x = input.network_input();
  if (x.size(2) != grid_ * patch_ || x.size(3) != grid_ * patch_) {
    throw ShapeError("vit branch: input " + std::to_string(x.size(2)) + "×" +
                     std::to_string(x.size(3)) + " does not match the " +
                     std::to_string(grid_) + "×" + std::to_string(grid_) + " patch grid");
  }
  auto t = patch_embed_(x).flatten(2).transpose(1, 2) + pos_embed_;
  for (auto& block : *blocks_) t = block->as<TransformerBlock>()->forward(t);
  return norm_(t);
}

FeatureMap VitBranchImpl::forward(const MaskedInput& input) {
  auto t = tokens(input);
  auto grid = t.transpose(1, 2).reshape({t.size(0), t.size(2), grid_, grid_});
  return FeatureMap{grid, patch_};
}

HybridEncoderImpl::HybridEncoderImpl(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  cnn_ = register_module("cnn", CnnBranch(cfg_));
  vit_ = register_module("vit", VitBranch(cfg_));
  int64_t in = 0;
  if (cfg_.mode != EncoderMode::VitOnly) in += 4 * cfg_.base_channels;
  if (cfg_.mode != EncoderMode::CnnOnly) in += cfg_.vit_dim;
  fuse_ = register_module("fuse", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, cfg_.fused_width(), 1)));
}

FeatureMap HybridEncoderImpl::fuse(const FeatureMap* cnn, const FeatureMap* vit) {
  const int64_t target = cfg_.image_size / 8;
  std::vector<torch::Tensor> parts;
  if (cnn != nullptr) {
    if (cnn->data.size(2) != target || cnn->data.size(3) != target) {
      throw ShapeError("fuse: CNN features are not at 1/8 scale");
    }
    parts.push_back(cnn->data);
  }
  if (vit != nullptr) {
    auto v = vit->data;
    if (v.size(2) != target || v.size(3) != target) {
      v = F::interpolate(v, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{target, target})
                                .mode(torch::kBilinear)
                                .align_corners(false));
    }
    parts.push_back(v);
  }
  if (parts.empty()) throw Error("fuse: no branch output");
  if (parts.size() == 2 && (parts[0].size(2) != parts[1].size(2) || parts[0].size(3) != parts[1].size(3))) {
    throw ShapeError("fuse: spatial mismatch after upsampling");
  }
  return FeatureMap{fuse_(torch::cat(parts, 1)), 8};
}

EncoderOutput HybridEncoderImpl::forward(const MaskedInput& input) {
  if (input.image.height() != cfg_.image_size || input.image.width() != cfg_.image_size) {
    throw ShapeError("encoder configured for " + std::to_string(cfg_.image_size) +
                     "² input, got " + std::to_string(input.image.height()) + "×" +
                     std::to_string(input.image.width()));
  }
  EncoderOutput out;
  std::optional<CnnFeatures> cnn;
  std::optional<FeatureMap> vit;
  if (cfg_.mode != EncoderMode::VitOnly) cnn = cnn_->forward(input);
  if (cfg_.mode != EncoderMode::CnnOnly) vit = vit_->forward(input);
  out.fused = fuse(cnn ? &cnn->out : nullptr, vit ? &*vit : nullptr);

  if (cnn) {
    out.skip_full = cnn->stem;
    out.skip_half = cnn->half;
    out.skip_quarter = cnn->quarter;
  } else {
    const auto n = input.image.batch();
    const auto s = cfg_.image_size;
    const auto b = cfg_.base_channels;
    auto opts = input.image.data().options();
    out.skip_full = torch::zeros({n, b, s, s}, opts);
    out.skip_half = torch::zeros({n, b, s / 2, s / 2}, opts);
    out.skip_quarter = torch::zeros({n, 2 * b, s / 4, s / 4}, opts);
  }
  return out;
}

}  // namespace semfill
