#include "semfill/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semfill {
namespace {

std::string shape_str(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

}  // namespace

void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b,
                        const char* what) {
  if (a.dim() != 4 || b.dim() != 4 || a.size(0) != b.size(0) ||
      a.size(2) != b.size(2) || a.size(3) != b.size(3)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

ImageBatch::ImageBatch(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 4 || data_.size(1) != 3) {
    throw ShapeError("ImageBatch expects N×3×H×W, got " + shape_str(data_));
  }
}

bool ImageBatch::in_range(double tolerance) const {
  auto d = data_.detach();
  return (d.min().item<double>() >= -1.0 - tolerance) &&
         (d.max().item<double>() <= 1.0 + tolerance);
}

MaskBatch::MaskBatch(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 4 || data_.size(1) != 1) {
    throw ShapeError("MaskBatch expects N×1×H×W, got " + shape_str(data_));
  }
  if (!((data_ == 0) | (data_ == 1)).all().item<bool>()) {
    throw Error("MaskBatch must be binary (1 = missing)");
  }
}

torch::Tensor MaskBatch::ratio() const {
  return data_.to(torch::kDouble).mean({1, 2, 3});
}

torch::Tensor MaskedInput::network_input() const {
  return torch::cat({image.data(), mask.data().to(image.data().dtype())}, 1);
}

SemanticMap::SemanticMap(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 4) {
    throw ShapeError("SemanticMap expects N×K×H×W, got " + shape_str(data_));
  }
}

bool SemanticMap::is_distribution(double tolerance) const {
  auto d = data_.detach().to(torch::kDouble);
  if (d.min().item<double>() < 0.0) return false;
  auto err = (d.sum(1) - 1.0).abs().max().item<double>();
  return err <= tolerance;
}

bool SemanticMap::is_one_hot() const {
  auto d = data_.detach();
  bool binary = ((d == 0) | (d == 1)).all().item<bool>();
  return binary && (d.sum(1) == 1).all().item<bool>();
}

MaskedInput make_masked_input(const ImageBatch& image, const MaskBatch& mask) {
  check_same_spatial(image.data(), mask.data(), "make_masked_input");
  auto keep = mask.data().to(image.data().dtype()) == 0;
  // where() rather than multiply so missing pixels are +0 even for non-finite input
  auto masked = torch::where(keep, image.data(), torch::zeros_like(image.data()));
  return MaskedInput{ImageBatch(masked), mask};
}

ImageBatch composite(const ImageBatch& image, const ImageBatch& prediction,
                     const MaskBatch& mask) {
  check_same_spatial(image.data(), mask.data(), "composite");
  check_same_spatial(image.data(), prediction.data(), "composite");
  auto hole = (mask.data() == 1).expand_as(image.data());
  return ImageBatch(torch::where(hole, prediction.data(), image.data()));
}

MaskBatch boundary_mask(const MaskBatch& mask, int radius) {
  if (radius < 1) throw Error("boundary_mask: radius must be >= 1");
  auto m = mask.data().to(torch::kFloat);
  const int64_t k = 2 * radius + 1;
  auto grow = [&](const torch::Tensor& t) {
    return torch::max_pool2d(t, {k, k}, {1, 1}, {radius, radius});
  };
  auto band = grow(m) * grow(1.0 - m);
  return MaskBatch(band.to(mask.data().dtype()));
}

int default_boundary_radius(int64_t resolution) {
  return std::max<int>(1, static_cast<int>(std::lround(3.0 * resolution / 128.0)));
}

MaskBatch downsample_mask(const MaskBatch& mask, int64_t factor) {
  if (factor == 1) return mask;
  if (mask.height() % factor != 0 || mask.width() % factor != 0) {
    throw ShapeError("downsample_mask: factor does not divide mask size");
  }
  auto m = mask.data().to(torch::kFloat);
  auto pooled = torch::max_pool2d(m, {factor, factor}, {factor, factor});
  return MaskBatch(pooled.to(mask.data().dtype()));
}

}  // namespace semfill
