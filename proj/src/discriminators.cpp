#include "semfill/discriminators.hpp"

#include <algorithm>

namespace semfill {
namespace {

constexpr double kSlope = 0.2;

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

int64_t width_at(int64_t base, int level) { return base * std::min<int64_t>(8, int64_t{1} << level); }

}  // namespace

GlobalCriticImpl::GlobalCriticImpl(const CriticConfig& cfg, int64_t in_channels) {
  if (cfg.image_size % 16 != 0) throw Error("critic: image size must be divisible by 16");
  int64_t in = in_channels;
  for (int i = 0; i < 4; ++i) {
    const int64_t out = width_at(cfg.base_channels, i);
    convs_.push_back(register_module("conv" + std::to_string(i), SpectralConv2d(in, out, 4, 2, 1)));
    in = out;
  }
  const int64_t side = cfg.image_size / 16;
  head_ = register_module("head", SpectralLinear(in * side * side, 1));
}

torch::Tensor GlobalCriticImpl::forward(const torch::Tensor& image) {
  auto x = image;
  for (auto& c : convs_) x = lrelu(c->forward(x));
  return head_->forward(x.flatten(1)).squeeze(1);
}

PatchCriticImpl::PatchCriticImpl(const CriticConfig& cfg) {
  int64_t in = 3;
  for (int i = 0; i < 4; ++i) {
    const int64_t out = width_at(cfg.base_channels, i);
    body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    body_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
    in = out;
  }
  body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 3).padding(1)));
  register_module("body", body_);
}

torch::Tensor PatchCriticImpl::forward(const torch::Tensor& image) { return body_->forward(image); }

SemanticCriticImpl::SemanticCriticImpl(const CriticConfig& cfg) : num_classes_(cfg.num_classes) {
  body_ = register_module("body", GlobalCritic(cfg, 3 + cfg.num_classes));
}

torch::Tensor SemanticCriticImpl::forward(const torch::Tensor& image, const torch::Tensor& semantic) {
  if (semantic.dim() != 4 || semantic.size(1) != num_classes_) {
    throw ShapeError("semantic critic: expected " + std::to_string(num_classes_) +
                     " semantic channels");
  }
  if (semantic.size(0) != image.size(0) || semantic.size(2) != image.size(2) ||
      semantic.size(3) != image.size(3)) {
    throw ShapeError("semantic critic: layout does not match image");
  }
  return body_->forward(torch::cat({image, semantic.to(image.dtype())}, 1));
}

CriticsImpl::CriticsImpl(const CriticConfig& cfg) {
  global = register_module("global", GlobalCritic(cfg));
  local = register_module("local", PatchCritic(cfg));
  semantic = register_module("semantic", SemanticCritic(cfg));
}

CriticScore CriticsImpl::score(const ImageBatch& image, const SemanticMap& layout) {
  return CriticScore{global->forward(image.data()), local->forward(image.data()),
                     semantic->forward(image.data(), layout.data())};
}

}  // namespace semfill
