#include <gtest/gtest.h>

#include "semfill/mask_gen.hpp"
#include "semfill/schedule.hpp"

namespace semfill {
namespace {

struct Expected {
  int epoch;
  double sem, perc, ctx, adv;
};

// Phase 1: rec + weak adversarial; phase 2: α = (e − 20)/30 with
// 0.03α, 3 + 0.5α, 0.05α and w_adv ramping 0.005 → 0.5; phase 3 fixed.
TEST(Schedule, WeightsAtReferenceEpochs) {
  const double a35 = 15.0 / 30.0;
  const Expected table[] = {
      {1, 0, 0, 0, 0.005},
      {10, 0, 0, 0, 0.005},
      {20, 0, 0, 0, 0.005},
      {21, 0.03 / 30, 3 + 0.5 / 30, 0.05 / 30, 0.005 + 0.495 / 30},
      {35, 0.03 * a35, 3 + 0.5 * a35, 0.05 * a35, 0.005 + 0.495 * a35},
      {50, 0.03, 3.5, 0.05, 0.5},
      {51, 0.01, 0.5, 0.08, 0.5},
      {250, 0.01, 0.5, 0.08, 0.5},
  };
  PhaseSchedule s;
  for (const auto& e : table) {
    auto w = s.weights_at(e.epoch);
    EXPECT_NEAR(w.w_sem, e.sem, 1e-12) << "epoch " << e.epoch;
    EXPECT_NEAR(w.w_perc, e.perc, 1e-12) << "epoch " << e.epoch;
    EXPECT_NEAR(w.w_ctx, e.ctx, 1e-12) << "epoch " << e.epoch;
    EXPECT_NEAR(w.w_adv, e.adv, 1e-12) << "epoch " << e.epoch;
    EXPECT_DOUBLE_EQ(w.w_gp, 5.0);
  }
}

TEST(Schedule, PiecewiseLinearAndMonotoneOnRamp) {
  PhaseSchedule s;
  for (int e = 22; e < 50; ++e) {
    auto prev = s.weights_at(e - 1), cur = s.weights_at(e), next = s.weights_at(e + 1);
    EXPECT_NEAR(cur.w_perc - prev.w_perc, next.w_perc - cur.w_perc, 1e-12);
    EXPECT_NEAR(cur.w_adv - prev.w_adv, next.w_adv - cur.w_adv, 1e-12);
    EXPECT_GE(cur.w_sem, prev.w_sem);
    EXPECT_GE(cur.w_adv, prev.w_adv);
  }
  // continuity of w_adv into the ramp, and the drop into phase 3
  EXPECT_NEAR(s.weights_at(21).w_adv - s.weights_at(20).w_adv, 0.495 / 30, 1e-12);
  EXPECT_DOUBLE_EQ(s.weights_at(50).w_perc, 3.5);
  EXPECT_DOUBLE_EQ(s.weights_at(51).w_perc, 0.5);
}

TEST(Schedule, CriticUpdateExamples) {
  PhaseSchedule s;
  EXPECT_TRUE(s.critic_update_due(5, 6));
  EXPECT_FALSE(s.critic_update_due(30, 6));
  EXPECT_TRUE(s.critic_update_due(100, 14));
  EXPECT_FALSE(s.critic_update_due(10, 1));
  EXPECT_EQ(s.critic_frequency(20), 3);
  EXPECT_EQ(s.critic_frequency(21), 5);
  EXPECT_EQ(s.critic_frequency(51), 7);
}

TEST(Schedule, MeasuredCriticFrequencyPerEpoch) {
  PhaseSchedule s;
  const int64_t batches = 1000;
  for (int epoch : {1, 20, 21, 50, 51, 250}) {
    int64_t updates = 0;
    for (int64_t b = 0; b < batches; ++b) updates += s.critic_update_due(epoch, b) ? 1 : 0;
    const double f = s.critic_frequency(epoch);
    EXPECT_LE(std::abs(static_cast<double>(updates) - batches / f), 1.0) << "epoch " << epoch;
  }
}

TEST(Schedule, RejectsBadInput) {
  PhaseSchedule s;
  EXPECT_THROW(s.weights_at(0), Error);
  EXPECT_THROW(s.critic_update_due(1, -1), Error);
  s.ramp_end = 10;
  EXPECT_THROW(s.validate(), Error);
}

TEST(MaskGen, SameSeedIsBitIdentical) {
  MaskSpec spec;
  spec.seed = 7;
  EXPECT_TRUE(torch::equal(generate_mask(spec, 64, 64).data(), generate_mask(spec, 64, 64).data()));
  MaskSpec other = spec;
  other.seed = 8;
  EXPECT_FALSE(torch::equal(generate_mask(spec, 64, 64).data(), generate_mask(other, 64, 64).data()));
}

TEST(MaskGen, RatiosWithinBand) {
  MaskSpec spec;
  spec.seed = 99;
  auto masks = generate_masks(spec, 500, 64, 64);
  auto r = masks.ratio();
  EXPECT_GE(r.min().item<double>(), 0.20);
  EXPECT_LE(r.max().item<double>(), 0.40);
  EXPECT_TRUE(((masks.data() == 0) | (masks.data() == 1)).all().item<bool>());
}

TEST(MaskGen, NarrowBandStaysWithinTwoPercent) {
  MaskSpec spec;
  spec.ratio_min = spec.ratio_max = 0.25;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    spec.seed = seed;
    const double r = generate_mask(spec, 64, 64).ratio().item<double>();
    EXPECT_NEAR(r, 0.25, 0.02) << "seed " << seed;
  }
}

TEST(MaskGen, RejectsInvalidSpecsAndSizes) {
  MaskSpec bad;
  bad.ratio_min = 0.5;
  bad.ratio_max = 0.4;
  EXPECT_THROW(generate_mask(bad, 64, 64), Error);
  EXPECT_THROW(generate_mask(MaskSpec{}, 16, 64), Error);
}

TEST(MaskGen, InfeasibleSpecGivesUpWithError) {
  MaskSpec spec;
  spec.ratio_min = 0.01;
  spec.ratio_max = 0.02;
  spec.brush_min = 120;
  spec.brush_max = 128;
  spec.max_attempts = 20;
  EXPECT_THROW(generate_mask(spec, 64, 64), Error);
}

TEST(MaskGen, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

}  // namespace
}  // namespace semfill
