#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "semfill/types.hpp"

namespace semfill {

/// Multi-level feature source for the perceptual loss. Inputs are images in
/// [-1, 1]; implementations map them to their own expected range.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> extract(const torch::Tensor& image) = 0;
  virtual std::string name() const = 0;
};

/// φ_l(x) = x for every level.
class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(int levels = 4) : levels_(levels) {}
  std::vector<torch::Tensor> extract(const torch::Tensor& image) override;
  std::string name() const override { return "identity"; }

 private:
  int levels_;
};

/// VGG-19 convolutional trunk truncated at relu4_4, returning relu1_2,
/// relu2_2, relu3_4 and relu4_4. Input is mapped from [-1, 1] to ImageNet
/// statistics. Parameters are frozen.
class Vgg19TrunkImpl : public torch::nn::Module {
 public:
  Vgg19TrunkImpl();
  std::vector<torch::Tensor> forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential features_;
  torch::Tensor mean_, std_;
};
TORCH_MODULE(Vgg19Trunk);

class Vgg19Extractor final : public FeatureExtractor {
 public:
  /// Loads a state dict saved with torch.save (see scripts/export_vgg19.py)
  /// whose keys follow torchvision's `features.<index>.weight|bias` layout;
  /// other keys are ignored. An empty path keeps random weights (only useful
  /// for shape checks).
  explicit Vgg19Extractor(const std::filesystem::path& weights = {});
  std::vector<torch::Tensor> extract(const torch::Tensor& image) override;
  std::string name() const override { return "vgg19"; }

 private:
  Vgg19Trunk trunk_;
};

/// Builds "identity" or "vgg19". A missing VGG weights file is a
/// configuration error unless `allow_stub` is set, in which case the
/// identity stub is returned with a warning.
std::shared_ptr<FeatureExtractor> make_perceptual_extractor(const std::string& kind,
                                                            const std::filesystem::path& weights,
                                                            bool allow_stub);

/// Embeds images as one feature vector each, for FID.
class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual torch::Tensor embed(const torch::Tensor& images) = 0;  // N×D, double
  virtual std::string name() const = 0;
};

/// Deterministic offline embedder: 4×4 average-pooled colours plus per-channel
/// statistics, projected by a fixed seeded random matrix.
class StubEmbedder final : public ImageEmbedder {
 public:
  explicit StubEmbedder(int64_t dim = 16, uint64_t seed = 7);
  torch::Tensor embed(const torch::Tensor& images) override;
  std::string name() const override { return "stub"; }

 private:
  int64_t dim_;
  uint64_t seed_;
};

/// Per-sample perceptual distance, for the LPIPS column.
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;
  virtual torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) = 0;  // N
  virtual std::string name() const = 0;
};

/// Offline stand-in: unit-normalised multi-level features of a
/// FeatureExtractor, mean squared difference averaged over levels.
class FeatureDistance final : public PerceptualDistance {
 public:
  explicit FeatureDistance(std::shared_ptr<FeatureExtractor> extractor);
  torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) override;
  std::string name() const override { return "feature-" + extractor_->name(); }

 private:
  std::shared_ptr<FeatureExtractor> extractor_;
};

}  // namespace semfill
