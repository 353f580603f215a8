#pragma once

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semfill/dataset.hpp"
#include "semfill/feature_extractor.hpp"
#include "semfill/generator.hpp"

namespace semfill {

struct EvalConfig;

struct MetricReport {
  std::string label;
  double psnr = 0;
  double ssim = 0;
  double l1 = 0;
  std::optional<double> lpips;  // absent when no distance is configured
  std::optional<double> fid;
  int64_t n_samples = 0;
};

/// Anything that turns (image, mask, seed) into a composite.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual ImageBatch inpaint(const ImageBatch& image, const MaskBatch& mask, uint64_t seed) = 0;
};

class GeneratorInpainter final : public Inpainter {
 public:
  GeneratorInpainter(InpaintGenerator generator, double sigma);
  ImageBatch inpaint(const ImageBatch& image, const MaskBatch& mask, uint64_t seed) override;

 private:
  InpaintGenerator generator_;
  double sigma_;
};

struct EvalExtractors {
  std::shared_ptr<ImageEmbedder> fid;           // null: FID column absent
  std::shared_ptr<PerceptualDistance> lpips;    // null: LPIPS column absent
};

EvalExtractors make_eval_extractors(const EvalConfig& cfg);

/// Metrics of composites against ground truth over the whole set. `masks`
/// holds one mask per image; batch b uses seed derive_seed(seed, b).
MetricReport evaluate(Inpainter& model, const Dataset& data, const MaskBatch& masks,
                      const EvalExtractors& extractors, int64_t batch_size, uint64_t seed);

/// Fixed-width table with columns PSNR, SSIM, L1, LPIPS, FID; absent
/// values print as "-".
std::string format_table(const std::vector<MetricReport>& rows);
std::string to_csv(const std::vector<MetricReport>& rows);
nlohmann::json to_json(const MetricReport& row);

}  // namespace semfill
