#pragma once

#include "semfill/types.hpp"

namespace semfill {

/// Conv2d whose weight is divided by its largest singular value (weight
/// reshaped to out × in·k·k), estimated by power iteration. The estimate is
/// converged at construction and refined by one iteration per training
/// forward; eval-mode forwards leave it untouched.
class SpectralConv2dImpl : public torch::nn::Module {
 public:
  SpectralConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride,
                     int64_t padding);

  torch::Tensor forward(const torch::Tensor& x);

  /// W / σ as used by the forward pass.
  torch::Tensor normalized_weight() const;
  /// Run power iterations until the singular vector estimate settles.
  void converge(int max_iterations = 500, double tolerance = 1e-10);

 private:
  void power_step();

  int64_t stride_, padding_;
  torch::Tensor weight_, bias_, u_, v_;
};
TORCH_MODULE(SpectralConv2d);

/// Same normalisation for a dense layer.
class SpectralLinearImpl : public torch::nn::Module {
 public:
  SpectralLinearImpl(int64_t in_features, int64_t out_features);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor normalized_weight() const;
  void converge(int max_iterations = 500, double tolerance = 1e-10);

 private:
  void power_step();
  torch::Tensor weight_, bias_, u_, v_;
};
TORCH_MODULE(SpectralLinear);

struct CriticConfig {
  int64_t image_size = 128;
  int64_t base_channels = 64;
  int64_t num_classes = 20;
};

/// Whole-image critic: four stride-2 spectrally normalised convolutions and
/// a spectrally normalised linear head. One unbounded score per sample.
class GlobalCriticImpl : public torch::nn::Module {
 public:
  explicit GlobalCriticImpl(const CriticConfig& cfg, int64_t in_channels = 3);
  torch::Tensor forward(const torch::Tensor& image);  // N

  std::vector<SpectralConv2d>& convs() { return convs_; }
  SpectralLinear& head() { return head_; }

 private:
  std::vector<SpectralConv2d> convs_;
  SpectralLinear head_{nullptr};
};
TORCH_MODULE(GlobalCritic);

/// Patch critic: four stride-2 4×4 convolutions and a 3×3 score head, giving
/// an (H/16)×(W/16) score map with a ~78 px receptive field.
class PatchCriticImpl : public torch::nn::Module {
 public:
  explicit PatchCriticImpl(const CriticConfig& cfg);
  torch::Tensor forward(const torch::Tensor& image);  // N×1×h'×w'

 private:
  torch::nn::Sequential body_;
};
TORCH_MODULE(PatchCritic);

/// Critic on the channel concatenation of an image and a semantic layout.
class SemanticCriticImpl : public torch::nn::Module {
 public:
  explicit SemanticCriticImpl(const CriticConfig& cfg);
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& semantic);  // N

  GlobalCritic& body() { return body_; }

 private:
  int64_t num_classes_;
  GlobalCritic body_{nullptr};
};
TORCH_MODULE(SemanticCritic);

struct CriticScore {
  torch::Tensor global_score;  // N
  torch::Tensor patch_scores;  // N×1×h'×w'
  torch::Tensor semantic_score;  // N
};

class CriticsImpl : public torch::nn::Module {
 public:
  explicit CriticsImpl(const CriticConfig& cfg);

  CriticScore score(const ImageBatch& image, const SemanticMap& semantic);

  GlobalCritic global{nullptr};
  PatchCritic local{nullptr};
  SemanticCritic semantic{nullptr};
};
TORCH_MODULE(Critics);

}  // namespace semfill
