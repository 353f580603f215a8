#include "semfill/losses.hpp"

#include <cmath>

#include "semfill/core_data.hpp"

namespace semfill {

void LossWeights::validate() const {
  for (double w : {w_sem, w_perc, w_ctx, w_adv, w_gp}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("loss weights must be finite and >= 0");
  }
  for (double w : level_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("perceptual level weights must be >= 0");
  }
}

torch::Tensor rec_loss(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& mask) {
  check_same_spatial(pred.data(), target.data(), "rec_loss");
  check_same_spatial(pred.data(), mask.data(), "rec_loss");
  auto m = mask.data().to(pred.data().dtype());
  auto abs_diff = (pred.data() - target.data()).abs() * m;
  auto count = (m.sum() * pred.data().size(1)).clamp_min(1.0);
  return abs_diff.sum() / count;
}

torch::Tensor sem_loss(const SemanticMap& pred, const SemanticMap& gt, const MaskBatch& mask) {
  if (pred.data().sizes() != gt.data().sizes()) throw ShapeError("sem_loss: prediction/label shape mismatch");
  check_same_spatial(pred.data(), mask.data(), "sem_loss");
  if (!gt.is_one_hot()) throw Error("sem_loss: ground-truth layout must be one-hot");
  auto known = 1.0 - mask.data().to(pred.data().dtype());
  auto logp = pred.data().clamp(kSemanticClamp, 1.0 - kSemanticClamp).log();
  auto ce = -(gt.data().to(logp.dtype()) * logp).sum(1, /*keepdim=*/true);
  return (ce * known).sum() / known.sum().clamp_min(1.0);
}

torch::Tensor perc_loss(const ImageBatch& pred, const ImageBatch& target, FeatureExtractor& extractor,
                        const std::array<double, 4>& level_weights) {
  check_same_spatial(pred.data(), target.data(), "perc_loss");
  auto fp = extractor.extract(pred.data());
  std::vector<torch::Tensor> ft;
  {
    torch::NoGradGuard guard;
    ft = extractor.extract(target.data());
  }
  if (fp.size() != level_weights.size() || ft.size() != level_weights.size()) {
    throw Error("perceptual extractor must return 4 feature levels");
  }
  torch::Tensor total = torch::zeros({}, pred.data().options());
  for (size_t l = 0; l < fp.size(); ++l) {
    if (level_weights[l] == 0.0) continue;
    total = total + level_weights[l] * (fp[l] - ft[l]).abs().mean();
  }
  return total;
}

std::pair<torch::Tensor, torch::Tensor> image_gradients(const torch::Tensor& image) {
  using torch::indexing::Slice;
  const auto h = image.size(2), w = image.size(3);
  auto dx = torch::zeros_like(image);
  auto dy = torch::zeros_like(image);
  // replicate padding: the difference past the last row/column is zero
  dx = torch::cat({image.index({Slice(), Slice(), Slice(), Slice(1, w)}) -
                       image.index({Slice(), Slice(), Slice(), Slice(0, w - 1)}),
                   dx.index({Slice(), Slice(), Slice(), Slice(0, 1)})},
                  3);
  dy = torch::cat({image.index({Slice(), Slice(), Slice(1, h), Slice()}) -
                       image.index({Slice(), Slice(), Slice(0, h - 1), Slice()}),
                   dy.index({Slice(), Slice(), Slice(0, 1), Slice()})},
                  2);
  return {dx, dy};
}

torch::Tensor ctx_difference_map(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& band) {
  check_same_spatial(pred.data(), target.data(), "ctx_loss");
  check_same_spatial(pred.data(), band.data(), "ctx_loss");
  auto [px, py] = image_gradients(pred.data());
  auto [tx, ty] = image_gradients(target.data());
  auto b = band.data().to(pred.data().dtype());
  return ((px - tx).abs() + (py - ty).abs()) * b;
}

torch::Tensor ctx_loss(const ImageBatch& pred, const ImageBatch& target, const MaskBatch& band) {
  auto diff = ctx_difference_map(pred, target, band);
  auto count = (band.data().to(diff.dtype()).sum() * pred.data().size(1)).clamp_min(1.0);
  return diff.sum() / count;
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::optional<at::Generator> gen, double lambda_gp) {
  if (real.sizes() != fake.sizes()) throw ShapeError("gradient_penalty: real/fake shape mismatch");
  const int64_t n = real.size(0);
  auto eps = torch::rand({n, 1, 1, 1}, gen, real.options().requires_grad(false));
  auto mixed = (eps * real.detach() + (1.0 - eps) * fake.detach()).requires_grad_(true);
  auto scores = critic(mixed);

  torch::Tensor grad;
  if (scores.requires_grad()) {
    auto grads = torch::autograd::grad({scores.sum()}, {mixed}, /*grad_outputs=*/{},
                                       /*retain_graph=*/true, /*create_graph=*/true,
                                       /*allow_unused=*/true);
    grad = grads[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(mixed);
  auto norm = (grad.flatten(1).pow(2).sum(1) + 1e-16).sqrt();
  return lambda_gp * (norm - 1.0).pow(2).mean();
}

torch::Tensor adv_g_loss(const CriticScore& scores) {
  auto patch = scores.patch_scores.flatten(1).mean(1);
  return -(scores.global_score + patch + scores.semantic_score).mean();
}

torch::Tensor wasserstein_critic_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return fake_scores.mean() - real_scores.mean();
}

double LossReport::recompute_total() const {
  return rec + weights.w_sem * sem + weights.w_perc * perc + weights.w_ctx * ctx + weights.w_adv * adv;
}

LossReport total_g_loss(const LossTerms& terms, const LossWeights& weights) {
  if (!terms.rec.defined()) throw Error("total_g_loss: reconstruction term is required");
  LossReport r;
  r.weights = weights;
  auto read = [](const torch::Tensor& t, const char* name) {
    if (!t.defined()) return 0.0;
    const double v = t.detach().to(torch::kDouble).item<double>();
    if (!std::isfinite(v)) throw NonFiniteLossError(name);
    return v;
  };
  r.rec = read(terms.rec, "rec");
  r.sem = read(terms.sem, "sem");
  r.perc = read(terms.perc, "perc");
  r.ctx = read(terms.ctx, "ctx");
  r.adv = read(terms.adv, "adv");

  torch::Tensor total = terms.rec;
  auto add = [&](const torch::Tensor& t, double w) {
    if (t.defined() && w != 0.0) total = total + w * t;
  };
  add(terms.sem, weights.w_sem);
  add(terms.perc, weights.w_perc);
  add(terms.ctx, weights.w_ctx);
  add(terms.adv, weights.w_adv);
  r.total_tensor = total;
  r.total = read(total, "total");
  return r;
}

}  // namespace semfill
