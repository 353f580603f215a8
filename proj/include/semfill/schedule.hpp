#pragma once

#include <array>
#include <cstdint>

#include "semfill/losses.hpp"

namespace semfill {

/// Three-phase loss weighting and critic cadence.
///
/// Phase 1 (epoch ≤ warmup_end): reconstruction plus a weak adversarial term.
/// Phase 2 (≤ ramp_end): α = (e − warmup_end) / (ramp_end − warmup_end) and
///   w_sem = 0.03α, w_perc = 3 + 0.5α, w_ctx = 0.05α, w_adv ramps linearly
///   from the phase-1 value to the final one.
/// Phase 3: fixed final weights.
struct PhaseSchedule {
  int warmup_end = 20;
  int ramp_end = 50;
  std::array<int, 3> critic_every = {3, 5, 7};

  double warmup_adv = 0.005;

  // phase-2 coefficients: w = base + slope · α
  double ramp_sem_slope = 0.03;
  double ramp_perc_base = 3.0;
  double ramp_perc_slope = 0.5;
  double ramp_ctx_slope = 0.05;

  /// Phase-3 weights; also carries w_gp and the perceptual level weights
  /// used in every phase.
  LossWeights final_weights;

  void validate() const;

  /// 1, 2 or 3.
  int phase(int epoch) const;
  LossWeights weights_at(int epoch) const;
  int critic_frequency(int epoch) const;
  bool critic_update_due(int epoch, int64_t batch_idx) const;
};

}  // namespace semfill
