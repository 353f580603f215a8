#include "semfill/mask_gen.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace semfill {

void MaskSpec::validate() const {
  if (!(ratio_min > 0.0 && ratio_min <= ratio_max && ratio_max < 1.0)) {
    throw Error("MaskSpec: require 0 < ratio_min <= ratio_max < 1");
  }
  if (strokes_min < 1 || strokes_max < strokes_min) throw Error("MaskSpec: bad stroke range");
  if (vertices_min < 2 || vertices_max < vertices_min) throw Error("MaskSpec: bad vertex range");
  if (brush_min <= 0.0 || brush_max < brush_min) throw Error("MaskSpec: bad brush range");
  if (max_attempts < 1) throw Error("MaskSpec: max_attempts must be >= 1");
}

uint64_t derive_seed(uint64_t base, uint64_t index) {
  // splitmix64 finaliser over the pair
  uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct Band {
  double lo;
  double hi;
};

Band acceptance_band(const MaskSpec& spec) {
  if (spec.ratio_max - spec.ratio_min >= spec.min_band) {
    return {spec.ratio_min, spec.ratio_max};
  }
  const double c = 0.5 * (spec.ratio_min + spec.ratio_max);
  return {std::max(1e-6, c - 0.5 * spec.min_band), std::min(1.0 - 1e-6, c + 0.5 * spec.min_band)};
}

// Draws strokes until coverage reaches `target`. Returns the final coverage.
double draw_strokes(const MaskSpec& spec, cv::Mat& canvas, std::mt19937_64& rng,
                    double target) {
  const int h = canvas.rows;
  const int w = canvas.cols;
  const double scale = std::sqrt(static_cast<double>(h) * w) / 128.0;
  const double total = static_cast<double>(h) * w;

  std::uniform_int_distribution<int> n_strokes(spec.strokes_min, spec.strokes_max);
  std::uniform_int_distribution<int> n_vertices(spec.vertices_min, spec.vertices_max);
  std::uniform_real_distribution<double> brush(spec.brush_min * scale, spec.brush_max * scale);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> step(4.0 * scale, 16.0 * scale);
  std::uniform_real_distribution<double> ux(0.0, w - 1.0);
  std::uniform_real_distribution<double> uy(0.0, h - 1.0);

  const int strokes = n_strokes(rng);
  double coverage = 0.0;
  for (int s = 0; s < strokes; ++s) {
    const int vertices = n_vertices(rng);
    const int thickness = std::max(1, static_cast<int>(std::lround(brush(rng))));
    cv::Point2d p(ux(rng), uy(rng));
    for (int v = 1; v < vertices; ++v) {
      const double a = angle(rng);
      const double len = step(rng);
      cv::Point2d q(std::clamp(p.x + len * std::cos(a), 0.0, w - 1.0),
                    std::clamp(p.y + len * std::sin(a), 0.0, h - 1.0));
      // thick OpenCV lines are drawn with round caps
      cv::line(canvas, cv::Point(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))),
               cv::Point(static_cast<int>(std::lround(q.x)), static_cast<int>(std::lround(q.y))),
               cv::Scalar(1), thickness, cv::LINE_8);
      p = q;
      coverage = cv::countNonZero(canvas) / total;
      if (coverage >= target) return coverage;
    }
  }
  return coverage;
}

}  // namespace

MaskBatch generate_mask(const MaskSpec& spec, int64_t height, int64_t width) {
  spec.validate();
  if (height < 32 || width < 32) throw Error("generate_mask: height and width must be >= 32");

  const Band band = acceptance_band(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> pick_target(band.lo, band.hi);

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    cv::Mat canvas = cv::Mat::zeros(static_cast<int>(height), static_cast<int>(width), CV_8U);
    const double coverage = draw_strokes(spec, canvas, rng, pick_target(rng));
    if (coverage < band.lo || coverage > band.hi) continue;

    auto t = torch::from_blob(canvas.data, {1, 1, height, width}, torch::kUInt8)
                 .to(torch::kFloat)
                 .clone();
    return MaskBatch(t);
  }
  throw Error("generate_mask: no mask within the occlusion band after " +
              std::to_string(spec.max_attempts) + " attempts");
}

MaskBatch generate_masks(const MaskSpec& spec, int64_t count, int64_t height,
                         int64_t width) {
  std::vector<torch::Tensor> parts;
  parts.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    MaskSpec s = spec;
    s.seed = derive_seed(spec.seed, static_cast<uint64_t>(i));
    parts.push_back(generate_mask(s, height, width).data());
  }
  return MaskBatch(torch::cat(parts, 0));
}

}  // namespace semfill
