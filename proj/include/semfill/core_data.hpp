#pragma once

#include "semfill/types.hpp"

namespace semfill {

/// I ⊙ (1 − M). Missing pixels are exactly zero.
MaskedInput make_masked_input(const ImageBatch& image, const MaskBatch& mask);

/// I ⊙ (1 − M) + prediction ⊙ M, selected per pixel so known pixels are
/// bit-identical to `image`.
ImageBatch composite(const ImageBatch& image, const ImageBatch& prediction,
                     const MaskBatch& mask);

/// Band of pixels within `radius` (Chebyshev) of the hole boundary, on
/// either side of it: dilate(M) ∧ dilate(1 − M).
MaskBatch boundary_mask(const MaskBatch& mask, int radius);

/// Boundary radius scaled from 3 px at 128² to the given resolution.
int default_boundary_radius(int64_t resolution);

/// Downsample a mask by an integer factor; a cell is missing if any of its
/// pixels is missing.
MaskBatch downsample_mask(const MaskBatch& mask, int64_t factor);

}  // namespace semfill
