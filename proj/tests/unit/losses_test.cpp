#include <gtest/gtest.h>

#include <cmath>

#include "semfill/core_data.hpp"
#include "semfill/losses.hpp"
#include "semfill/mask_gen.hpp"
#include "semfill/semantic.hpp"
#include "semfill/texture.hpp"
#include "support.hpp"

namespace semfill {
namespace {

using testing::random_image;
using testing::square_hole;

SemanticMap random_one_hot(int64_t n, int64_t k, int64_t size, uint64_t seed) {
  torch::manual_seed(seed);
  return one_hot_labels(torch::randint(0, k, {n, size, size}, torch::kLong), k);
}

TEST(RecLoss, ZeroOnPerfectPredictionAndEmptyHole) {
  auto img = random_image(2, 16, 1);
  EXPECT_EQ(rec_loss(img, img, square_hole(2, 16, 2, 2, 8)).item<double>(), 0.0);
  EXPECT_EQ(rec_loss(random_image(2, 16, 2), img, MaskBatch(torch::zeros({2, 1, 16, 16}))).item<double>(), 0.0);
}

TEST(RecLoss, SingleHolePixel) {
  auto target = torch::zeros({1, 3, 8, 8});
  auto pred = target.clone();
  pred.index_put_({0, torch::indexing::Slice(), 3, 4}, 0.5);
  auto mask = torch::zeros({1, 1, 8, 8});
  mask[0][0][3][4] = 1;
  EXPECT_DOUBLE_EQ(rec_loss(ImageBatch(pred), ImageBatch(target), MaskBatch(mask)).item<double>(), 0.5);
}

TEST(RecLoss, MeanOverHolePixelsOnly) {
  auto pred = random_image(2, 16, 3);
  auto target = random_image(2, 16, 4);
  auto mask = square_hole(2, 16, 4, 4, 6);
  auto m = mask.data().expand_as(pred.data()).to(torch::kBool);
  const double expected = (pred.data() - target.data()).abs().masked_select(m).mean().item<double>();
  EXPECT_NEAR(rec_loss(pred, target, mask).item<double>(), expected, 1e-6);
}

TEST(SemLoss, PerfectPredictionIsNearZero) {
  auto gt = random_one_hot(2, 4, 8, 5);
  auto v = sem_loss(SemanticMap(gt.data().to(torch::kDouble)), gt, square_hole(2, 8, 0, 0, 3)).item<double>();
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-5);
}

TEST(SemLoss, UniformPredictionIsLogK) {
  for (int64_t k : {4, 8, 20}) {
    auto gt = random_one_hot(2, k, 8, 6);
    auto uniform = SemanticMap(torch::full({2, k, 8, 8}, 1.0 / static_cast<double>(k), torch::kDouble));
    auto v = sem_loss(uniform, gt, square_hole(2, 8, 1, 1, 4)).item<double>();
    EXPECT_NEAR(v, std::log(static_cast<double>(k)), 1e-6);
  }
}

TEST(SemLoss, AllMissingIsZeroAndNonOneHotThrows) {
  auto gt = random_one_hot(1, 4, 8, 7);
  auto pred = SemanticMap(torch::full({1, 4, 8, 8}, 0.25));
  EXPECT_EQ(sem_loss(pred, gt, MaskBatch(torch::ones({1, 1, 8, 8}))).item<double>(), 0.0);
  EXPECT_THROW(sem_loss(pred, pred, MaskBatch(torch::zeros({1, 1, 8, 8}))), Error);
}

TEST(SemLoss, IgnoresHolePixels) {
  auto gt = random_one_hot(1, 4, 8, 8);
  auto mask = square_hole(1, 8, 2, 2, 4);
  auto pred = gt.data().clone();
  // corrupt only the hole
  pred.index_put_({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(2, 6),
                   torch::indexing::Slice(2, 6)},
                  0.25);
  EXPECT_LT(sem_loss(SemanticMap(pred), gt, mask).item<double>(), 1e-5);
}

TEST(PercLoss, IdentityStubEqualsWeightedL1) {
  IdentityExtractor id;
  auto a = random_image(2, 16, 9);
  auto b = random_image(2, 16, 10);
  const std::array<double, 4> w = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
  const double l1 = (a.data() - b.data()).abs().mean().item<double>();
  EXPECT_NEAR(perc_loss(a, b, id, w).item<double>(), l1 * (w[0] + w[1] + w[2] + w[3]), 1e-6);
  EXPECT_NEAR(perc_loss(a, b, id, {1, 0, 0, 0}).item<double>(), l1, 1e-6);
  EXPECT_EQ(perc_loss(a, a, id, w).item<double>(), 0.0);
}

TEST(CtxLoss, ZeroOnPerfectAndConstantShift) {
  auto img = random_image(1, 16, 11);
  auto band = boundary_mask(square_hole(1, 16, 4, 4, 8), 2);
  EXPECT_EQ(ctx_loss(img, img, band).item<double>(), 0.0);
  auto shifted = ImageBatch(img.data().to(torch::kDouble) + 0.25);
  EXPECT_NEAR(ctx_loss(shifted, ImageBatch(img.data().to(torch::kDouble)), band).item<double>(), 0.0, 1e-12);
}

TEST(CtxLoss, VerticalEdgeOnFourByFour) {
  // pred has a unit step between columns 1 and 2; target is flat.
  auto pred = torch::zeros({1, 3, 4, 4});
  pred.index_put_({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(),
                   torch::indexing::Slice(2, 4)},
                  1.0);
  auto target = torch::zeros({1, 3, 4, 4});
  auto band = MaskBatch(torch::ones({1, 1, 4, 4}));
  auto map = ctx_difference_map(ImageBatch(pred), ImageBatch(target), band);
  // forward difference x[c+1] − x[c] is 1 only on column 1
  for (int64_t col = 0; col < 4; ++col) {
    const double expected = col == 1 ? 1.0 : 0.0;
    EXPECT_TRUE((map.index({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(), col}) ==
                 expected)
                    .all()
                    .item<bool>())
        << "column " << col;
  }
  // 4 edge pixels of 16 per channel
  EXPECT_NEAR(ctx_loss(ImageBatch(pred), ImageBatch(target), band).item<double>(), 0.25, 1e-7);
  EXPECT_EQ(ctx_loss(ImageBatch(pred), ImageBatch(target), MaskBatch(torch::zeros({1, 1, 4, 4}))).item<double>(),
            0.0);
}

TEST(GradientPenalty, LinearCriticAnalyticCases) {
  const double lambda = 5.0;
  for (double scale : {0.0, 1.0, 2.0}) {
    for (uint64_t draw = 0; draw < 100; ++draw) {
      torch::manual_seed(draw);
      auto w = torch::randn({3, 8, 8}, torch::kDouble);
      w = w / w.norm();
      auto critic = [&](const torch::Tensor& x) { return (x * (scale * w)).flatten(1).sum(1); };
      auto real = torch::rand({4, 3, 8, 8}, torch::kDouble);
      auto fake = torch::rand({4, 3, 8, 8}, torch::kDouble);
      const double expected = lambda * (scale - 1.0) * (scale - 1.0);
      auto gp = gradient_penalty(critic, real, fake, make_generator(draw), lambda).item<double>();
      ASSERT_NEAR(gp, expected, 1e-6) << "scale " << scale;
    }
  }
}

TEST(GradientPenalty, InterpolationIsPerSample) {
  // critic(x) = ½‖x‖², so ∇ = Ĩ = ε·1 and the norm depends on each sample's ε.
  auto real = torch::ones({2, 3, 4, 4}, torch::kDouble);
  auto fake = torch::zeros({2, 3, 4, 4}, torch::kDouble);
  auto critic = [](const torch::Tensor& x) { return x.pow(2).flatten(1).sum(1) * 0.5; };
  auto gen = make_generator(3);
  auto gen_copy = make_generator(3);
  auto eps = torch::rand({2, 1, 1, 1}, gen_copy, torch::TensorOptions().dtype(torch::kDouble));
  // norm ε·√48
  auto norms = eps.flatten() * std::sqrt(48.0);
  const double expected = 5.0 * (norms - 1.0).pow(2).mean().item<double>();
  EXPECT_NEAR(gradient_penalty(critic, real, fake, gen, 5.0).item<double>(), expected, 1e-9);
}

TEST(AdvLoss, Identities) {
  CriticScore zero{torch::zeros({3}), torch::zeros({3, 1, 2, 2}), torch::zeros({3})};
  EXPECT_EQ(adv_g_loss(zero).item<double>(), 0.0);
  CriticScore s{torch::ones({3}), torch::full({3, 1, 2, 2}, 2.0), torch::full({3}, 3.0)};
  EXPECT_DOUBLE_EQ(adv_g_loss(s).item<double>(), -6.0);
  torch::manual_seed(1);
  CriticScore r{torch::randn({3}), torch::randn({3, 1, 2, 2}), torch::randn({3})};
  CriticScore r2{r.global_score * 2, r.patch_scores * 2, r.semantic_score * 2};
  EXPECT_NEAR(adv_g_loss(r2).item<double>(), 2 * adv_g_loss(r).item<double>(), 1e-6);
  EXPECT_DOUBLE_EQ(wasserstein_critic_loss(torch::full({2}, 3.0), torch::full({2}, 1.0)).item<double>(), -2.0);
}

TEST(TotalLoss, WeightedSum) {
  auto one = torch::ones({}, torch::kDouble);
  LossTerms t{one, one, one, one, one};
  LossWeights w;
  auto r = total_g_loss(t, w);
  EXPECT_NEAR(r.total, 2.09, 1e-12);
  EXPECT_NEAR(r.recompute_total(), r.total, 1e-6 * std::abs(r.total));
  LossWeights none{0, 0, 0, 0, 5.0};
  EXPECT_DOUBLE_EQ(total_g_loss({torch::full({}, 0.7, torch::kDouble), one, one, one, one}, none).total, 0.7);
}

TEST(TotalLoss, NonFiniteTermIsNamed) {
  auto one = torch::ones({});
  LossTerms t{one, one, torch::full({}, NAN), one, one};
  try {
    total_g_loss(t, LossWeights{});
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.term(), "perc");
  }
}

TEST(Losses, NonNegativeOnRandomInputs) {
  IdentityExtractor id;
  for (uint64_t s = 0; s < 10; ++s) {
    auto a = random_image(2, 32, s);
    auto b = random_image(2, 32, s + 50);
    MaskSpec spec;
    spec.seed = s;
    auto mask = generate_masks(spec, 2, 32, 32);
    EXPECT_GE(rec_loss(a, b, mask).item<double>(), 0.0);
    EXPECT_GE(ctx_loss(a, b, boundary_mask(mask, 1)).item<double>(), 0.0);
    EXPECT_GE(perc_loss(a, b, id, LossWeights{}.level_weights).item<double>(), 0.0);
  }
}

// Gradient of the supervised total w.r.t. the prediction against central differences.
TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  IdentityExtractor id;
  torch::manual_seed(21);
  auto target = torch::rand({1, 3, 16, 16}, torch::kDouble) * 2 - 1;
  auto pred = (torch::rand({1, 3, 16, 16}, torch::kDouble) * 2 - 1).requires_grad_(true);
  auto mask = square_hole(1, 16, 4, 4, 8);
  auto band = boundary_mask(mask, 1);
  LossWeights w;
  auto loss_of = [&](const torch::Tensor& p) {
    ImageBatch pi(p), ti(target);
    LossTerms t{rec_loss(pi, ti, mask), {}, perc_loss(pi, ti, id, w.level_weights), ctx_loss(pi, ti, band), {}};
    return total_g_loss(t, w).total_tensor;
  };
  auto g = torch::autograd::grad({loss_of(pred)}, {pred})[0];
  auto flat = pred.detach().flatten();
  const double h = 1e-6;
  for (int64_t i = 0; i < flat.numel(); i += 37) {
    auto plus = flat.clone();
    auto minus = flat.clone();
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss_of(plus.view_as(pred)).item<double>() - loss_of(minus.view_as(pred)).item<double>()) /
                      (2 * h);
    const double an = g.flatten()[i].item<double>();
    EXPECT_LE(std::abs(fd - an), 1e-3 * std::max(std::abs(fd), 1e-6) + 1e-9) << "index " << i;
  }
}

}  // namespace
}  // namespace semfill
