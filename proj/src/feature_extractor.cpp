#include "semfill/feature_extractor.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include "semfill/log.hpp"
#include "semfill/texture.hpp"

namespace semfill {

std::vector<torch::Tensor> IdentityExtractor::extract(const torch::Tensor& image) {
  return std::vector<torch::Tensor>(static_cast<size_t>(levels_), image);
}

namespace {

// torchvision vgg19 "features" indices of the tapped ReLUs
constexpr std::array<int, 4> kTaps = {3, 8, 17, 26};

}  // namespace

Vgg19TrunkImpl::Vgg19TrunkImpl() {
  const std::vector<int> plan = {64, 64, -1, 128, 128, -1, 256, 256, 256, 256, -1, 512, 512, 512, 512};
  int64_t in = 3;
  for (int c : plan) {
    if (c < 0) {
      features_->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
      continue;
    }
    features_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, c, 3).padding(1)));
    features_->push_back(torch::nn::ReLU());
    in = c;
  }
  register_module("features", features_);
  mean_ = register_buffer("mean", torch::tensor({0.485, 0.456, 0.406}).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229, 0.224, 0.225}).view({1, 3, 1, 1}));
  for (auto& p : parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> Vgg19TrunkImpl::forward(const torch::Tensor& image) {
  auto x = ((image + 1.0) * 0.5 - mean_) / std_;
  std::vector<torch::Tensor> taps;
  int index = 0;
  for (auto& layer : *features_) {
    x = layer.forward(x);
    if (std::find(kTaps.begin(), kTaps.end(), index) != kTaps.end()) taps.push_back(x);
    ++index;
  }
  return taps;
}

Vgg19Extractor::Vgg19Extractor(const std::filesystem::path& weights) {
  if (!weights.empty()) {
    std::ifstream in(weights, std::ios::binary);
    if (!in) throw Error("cannot read VGG weights " + weights.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    c10::IValue loaded;
    try {
      loaded = torch::pickle_load(bytes);
    } catch (const c10::Error& e) {
      throw Error("VGG weights " + weights.string() + " are not a saved state dict: " + e.what_without_backtrace());
    }
    if (!loaded.isGenericDict()) throw Error("VGG weights " + weights.string() + " do not hold a state dict");
    std::map<std::string, torch::Tensor> state;
    for (const auto& kv : loaded.toGenericDict()) {
      if (kv.key().isString() && kv.value().isTensor()) state[kv.key().toStringRef()] = kv.value().toTensor();
    }
    torch::NoGradGuard guard;
    for (auto& item : trunk_->named_parameters()) {
      auto it = state.find(item.key());
      if (it == state.end()) {
        throw Error("VGG weights missing tensor '" + item.key() + "' in " + weights.string());
      }
      if (it->second.sizes() != item.value().sizes()) {
        throw Error("VGG weights tensor '" + item.key() + "' has the wrong shape in " + weights.string());
      }
      item.value().copy_(it->second);
    }
  }
  trunk_->eval();
}

std::vector<torch::Tensor> Vgg19Extractor::extract(const torch::Tensor& image) {
  trunk_->to(image.scalar_type());
  return trunk_->forward(image);
}

std::shared_ptr<FeatureExtractor> make_perceptual_extractor(const std::string& kind,
                                                            const std::filesystem::path& weights,
                                                            bool allow_stub) {
  if (kind == "identity") return std::make_shared<IdentityExtractor>();
  if (kind != "vgg19") throw Error("unknown perceptual extractor '" + kind + "'");
  if (!weights.empty() && std::filesystem::exists(weights)) {
    return std::make_shared<Vgg19Extractor>(weights);
  }
  if (!allow_stub) {
    throw Error("VGG-19 weights not found at '" + weights.string() +
                "' and the perceptual loss is enabled");
  }
  log::warn("VGG-19 weights not found at '", weights.string(),
            "'; perceptual loss falls back to the IDENTITY STUB");
  return std::make_shared<IdentityExtractor>();
}

StubEmbedder::StubEmbedder(int64_t dim, uint64_t seed) : dim_(dim), seed_(seed) {}

torch::Tensor StubEmbedder::embed(const torch::Tensor& images) {
  auto x = images.detach().to(torch::kDouble);
  auto pooled = torch::adaptive_avg_pool2d(x, {4, 4}).flatten(1);  // N×48
  auto stats = torch::cat({x.mean({2, 3}), x.std({2, 3}, /*unbiased=*/false)}, 1);  // N×6
  auto raw = torch::cat({pooled, stats}, 1);
  auto gen = make_generator(seed_);
  auto proj = torch::randn({raw.size(1), dim_}, gen, torch::kDouble) / std::sqrt(double(raw.size(1)));
  return torch::matmul(raw, proj);
}

FeatureDistance::FeatureDistance(std::shared_ptr<FeatureExtractor> extractor)
    : extractor_(std::move(extractor)) {}

torch::Tensor FeatureDistance::distance(const torch::Tensor& a, const torch::Tensor& b) {
  torch::NoGradGuard guard;
  auto fa = extractor_->extract(a);
  auto fb = extractor_->extract(b);
  torch::Tensor total = torch::zeros({a.size(0)}, a.options().dtype(torch::kDouble));
  for (size_t l = 0; l < fa.size(); ++l) {
    auto na = fa[l] / (fa[l].pow(2).sum(1, true).sqrt() + 1e-10);
    auto nb = fb[l] / (fb[l].pow(2).sum(1, true).sqrt() + 1e-10);
    total = total + (na - nb).pow(2).sum(1).mean({1, 2}).to(torch::kDouble);
  }
  return total / static_cast<double>(fa.size());
}

}  // namespace semfill
