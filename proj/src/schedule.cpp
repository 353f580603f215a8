#include "semfill/schedule.hpp"

namespace semfill {

void PhaseSchedule::validate() const {
  if (warmup_end < 0 || ramp_end <= warmup_end) {
    throw Error("schedule: phase boundaries must satisfy 0 <= warmup_end < ramp_end");
  }
  for (int f : critic_every) {
    if (f < 1) throw Error("schedule: critic frequencies must be >= 1");
  }
  if (warmup_adv < 0) throw Error("schedule: warmup_adv must be >= 0");
  final_weights.validate();
}

int PhaseSchedule::phase(int epoch) const {
  if (epoch < 1) throw Error("schedule: epoch must be >= 1 (got " + std::to_string(epoch) + ")");
  if (epoch <= warmup_end) return 1;
  if (epoch <= ramp_end) return 2;
  return 3;
}

LossWeights PhaseSchedule::weights_at(int epoch) const {
  LossWeights w = final_weights;
  switch (phase(epoch)) {
    case 1:
      w.w_sem = 0.0;
      w.w_perc = 0.0;
      w.w_ctx = 0.0;
      w.w_adv = warmup_adv;
      break;
    case 2: {
      const double alpha = static_cast<double>(epoch - warmup_end) / (ramp_end - warmup_end);
      w.w_sem = ramp_sem_slope * alpha;
      w.w_perc = ramp_perc_base + ramp_perc_slope * alpha;
      w.w_ctx = ramp_ctx_slope * alpha;
      w.w_adv = warmup_adv + (final_weights.w_adv - warmup_adv) * alpha;
      break;
    }
    default:
      break;
  }
  return w;
}

int PhaseSchedule::critic_frequency(int epoch) const {
  return critic_every[static_cast<size_t>(phase(epoch) - 1)];
}

bool PhaseSchedule::critic_update_due(int epoch, int64_t batch_idx) const {
  if (batch_idx < 0) throw Error("schedule: batch index must be >= 0");
  return batch_idx % critic_frequency(epoch) == 0;
}

}  // namespace semfill
