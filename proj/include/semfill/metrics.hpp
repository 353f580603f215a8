#pragma once

#include "semfill/types.hpp"

namespace semfill {

inline constexpr double kPsnrCap = 100.0;

/// Mean per-image 10·log10(1 / MSE) on [0, 1] images, capped at 100 dB.
double psnr(const ImageBatch& a, const ImageBatch& b);

/// Mean local SSIM (11×11 Gaussian window, σ = 1.5, valid region,
/// C1 = 0.01², C2 = 0.03²) per channel on [0, 1] images, averaged.
double ssim(const ImageBatch& a, const ImageBatch& b);

/// Mean absolute difference in the [-1, 1] model range.
double l1_metric(const ImageBatch& a, const ImageBatch& b);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from round-off are clamped to zero.
torch::Tensor psd_sqrt(const torch::Tensor& m);

/// Fréchet distance between Gaussians with the given moments.
double fid_from_moments(const torch::Tensor& mu1, const torch::Tensor& cov1, const torch::Tensor& mu2,
                        const torch::Tensor& cov2);

/// Fréchet distance between two N×D feature sets (unbiased covariances).
double fid(const torch::Tensor& real_features, const torch::Tensor& fake_features);

}  // namespace semfill
