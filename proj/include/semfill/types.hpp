#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "semfill/errors.hpp"

namespace semfill {

/// N×3×H×W image stack with values in [-1, 1].
///
/// Construction checks the shape only; range is checked on demand with
/// `in_range()` because predictions under autograd pass through here too.
class ImageBatch {
 public:
  ImageBatch() = default;
  explicit ImageBatch(torch::Tensor data);

  const torch::Tensor& data() const noexcept { return data_; }
  int64_t batch() const { return data_.size(0); }
  int64_t height() const { return data_.size(2); }
  int64_t width() const { return data_.size(3); }
  bool defined() const noexcept { return data_.defined(); }

  bool in_range(double tolerance = 0.0) const;

 private:
  torch::Tensor data_;
};

/// N×1×H×W binary occlusion mask. 1 marks a missing pixel.
class MaskBatch {
 public:
  MaskBatch() = default;
  /// Throws ShapeError on a bad shape and Error if any value is not 0 or 1.
  explicit MaskBatch(torch::Tensor data);

  const torch::Tensor& data() const noexcept { return data_; }
  int64_t batch() const { return data_.size(0); }
  int64_t height() const { return data_.size(2); }
  int64_t width() const { return data_.size(3); }
  bool defined() const noexcept { return data_.defined(); }

  /// Per-sample occlusion ratio, shape N.
  torch::Tensor ratio() const;

 private:
  torch::Tensor data_;
};

/// Masked image I ⊙ (1 − M) together with its mask.
struct MaskedInput {
  ImageBatch image;
  MaskBatch mask;

  /// Channel concatenation of image and raw mask, N×4×H×W.
  torch::Tensor network_input() const;
};

/// Per-pixel class distribution, N×K×H×W.
class SemanticMap {
 public:
  SemanticMap() = default;
  explicit SemanticMap(torch::Tensor data);

  const torch::Tensor& data() const noexcept { return data_; }
  int64_t classes() const { return data_.size(1); }
  bool defined() const noexcept { return data_.defined(); }

  /// True when every pixel's class vector is nonnegative and sums to 1.
  bool is_distribution(double tolerance = 1e-5) const;
  bool is_one_hot() const;

 private:
  torch::Tensor data_;
};

struct FeatureMap {
  torch::Tensor data;  // N×C×h×w
  int64_t scale = 1;   // downsample factor relative to the input image

  int64_t channels() const { return data.size(1); }
  bool finite() const { return torch::isfinite(data).all().item<bool>(); }
};

void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b,
                        const char* what);

}  // namespace semfill
