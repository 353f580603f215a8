#pragma once

#include <ATen/core/Generator.h>

#include <array>
#include <functional>
#include <optional>

#include "semfill/discriminators.hpp"
#include "semfill/feature_extractor.hpp"

namespace semfill {

struct LossWeights {
  double w_sem = 0.01;
  double w_perc = 0.5;
  double w_ctx = 0.08;
  double w_adv = 0.5;
  double w_gp = 5.0;
  /// Per-level perceptual weights for relu1_2, relu2_2, relu3_4, relu4_4.
  std::array<double, 4> level_weights = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};

  void validate() const;
};

/// Mean |Î − I| over hole pixels and channels; 0 for an empty hole.
torch::Tensor rec_loss(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& mask);

/// Probability clamp applied before the logarithm in the semantic loss.
inline constexpr double kSemanticClamp = 1e-6;

/// Mean cross-entropy −Σ_k S_gt log S over known pixels; 0 when none are
/// known. Throws if `gt` is not one-hot.
torch::Tensor sem_loss(const SemanticMap& pred, const SemanticMap& gt, const MaskBatch& mask);

/// Σ_l λ_l · mean|φ_l(Î) − φ_l(I)|.
torch::Tensor perc_loss(const ImageBatch& pred, const ImageBatch& target, FeatureExtractor& extractor,
                        const std::array<double, 4>& level_weights);

/// Forward-difference gradients (replicate padding), each N×C×H×W.
std::pair<torch::Tensor, torch::Tensor> image_gradients(const torch::Tensor& image);

/// Per-pixel |∇x Î − ∇x I| + |∇y Î − ∇y I| restricted to the band, N×C×H×W.
torch::Tensor ctx_difference_map(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& band);

/// Band-pixel mean of `ctx_difference_map`; 0 for an empty band.
torch::Tensor ctx_loss(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& band);

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// λ_gp · E[(‖∇_Ĩ D(Ĩ)‖₂ − 1)²] with Ĩ = εI + (1 − ε)Î, one ε ~ U[0,1] per
/// sample. Differentiable w.r.t. the critic parameters.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::optional<at::Generator> gen, double lambda_gp);

/// −E[D_g + mean(D_l) + D_s].
torch::Tensor adv_g_loss(const CriticScore& scores);

/// E[D(fake)] − E[D(real)] for one critic, patch maps averaged first.
torch::Tensor wasserstein_critic_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

struct LossTerms {
  torch::Tensor rec, sem, perc, ctx, adv;  // undefined terms count as 0
};

struct LossReport {
  double rec = 0, sem = 0, perc = 0, ctx = 0, adv = 0;
  double total = 0;
  LossWeights weights;
  torch::Tensor total_tensor;  // differentiable total

  /// rec + Σ wᵢ · termᵢ recomputed from the stored fields.
  double recompute_total() const;
};

/// L_rec + w_sem L_sem + w_perc L_perc + w_ctx L_ctx + w_adv L_adv.
/// Throws NonFiniteLossError naming the first non-finite term.
LossReport total_g_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace semfill
