#pragma once

#include <cstdint>

#include "semfill/types.hpp"

namespace semfill {

/// Parameters of the free-form stroke mask generator. Pixel quantities are
/// given at 128² and scaled linearly to the requested resolution.
struct MaskSpec {
  double ratio_min = 0.20;
  double ratio_max = 0.40;
  int strokes_min = 1;
  int strokes_max = 4;
  int vertices_min = 10;
  int vertices_max = 30;
  double brush_min = 5.0;
  double brush_max = 25.0;
  /// Acceptance bands narrower than this are widened around their centre.
  double min_band = 0.04;
  int max_attempts = 500;
  uint64_t seed = 0;

  void validate() const;
};

/// One 1×1×H×W mask drawn from `spec`. Same spec and size give the same mask.
MaskBatch generate_mask(const MaskSpec& spec, int64_t height, int64_t width);

/// `count` masks; sample i uses the seed derived from (spec.seed, i).
MaskBatch generate_masks(const MaskSpec& spec, int64_t count, int64_t height,
                         int64_t width);

/// Seed for the i-th mask of a batch drawn from `base`.
uint64_t derive_seed(uint64_t base, uint64_t index);

}  // namespace semfill
