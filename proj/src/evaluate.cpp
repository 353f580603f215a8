#include "semfill/evaluate.hpp"

#include <cstdio>
#include <sstream>

#include "semfill/config.hpp"
#include "semfill/mask_gen.hpp"
#include "semfill/metrics.hpp"

namespace semfill {

GeneratorInpainter::GeneratorInpainter(InpaintGenerator generator, double sigma)
    : generator_(std::move(generator)), sigma_(sigma) {}

ImageBatch GeneratorInpainter::inpaint(const ImageBatch& image, const MaskBatch& mask, uint64_t seed) {
  return generator_->inpaint(image, mask, sigma_, seed);
}

EvalExtractors make_eval_extractors(const EvalConfig& cfg) {
  EvalExtractors e;
  if (cfg.fid == "stub") e.fid = std::make_shared<StubEmbedder>();
  if (cfg.lpips == "stub") e.lpips = std::make_shared<FeatureDistance>(std::make_shared<IdentityExtractor>());
  return e;
}

MetricReport evaluate(Inpainter& model, const Dataset& data, const MaskBatch& masks,
                      const EvalExtractors& extractors, int64_t batch_size, uint64_t seed) {
  if (masks.data().size(0) != data.size()) {
    throw ShapeError("evaluate: need one mask per image (" + std::to_string(data.size()) + "), got " +
                     std::to_string(masks.data().size(0)));
  }
  torch::NoGradGuard no_grad;
  MetricReport r;
  double psnr_sum = 0, ssim_sum = 0, l1_sum = 0, lpips_sum = 0;
  std::vector<torch::Tensor> real_feats, fake_feats;
  const auto batches = data.batches(batch_size);
  for (size_t b = 0; b < batches.size(); ++b) {
    const Batch& batch = batches[b];
    const auto idx = torch::tensor(batch.indices, torch::kLong);
    const MaskBatch m(masks.data().index_select(0, idx));
    const ImageBatch out = model.inpaint(batch.images, m, derive_seed(seed, b));
    const auto n = static_cast<double>(batch.indices.size());
    psnr_sum += psnr(out, batch.images) * n;
    ssim_sum += ssim(out, batch.images) * n;
    l1_sum += l1_metric(out, batch.images) * n;
    if (extractors.lpips) lpips_sum += extractors.lpips->distance(out.data(), batch.images.data()).sum().item<double>();
    if (extractors.fid) {
      real_feats.push_back(extractors.fid->embed(batch.images.data()));
      fake_feats.push_back(extractors.fid->embed(out.data()));
    }
    r.n_samples += static_cast<int64_t>(batch.indices.size());
  }
  const auto total = static_cast<double>(r.n_samples);
  r.psnr = psnr_sum / total;
  r.ssim = ssim_sum / total;
  r.l1 = l1_sum / total;
  if (extractors.lpips) r.lpips = lpips_sum / total;
  if (extractors.fid) r.fid = fid(torch::cat(real_feats), torch::cat(fake_feats));
  return r;
}

namespace {

std::string fmt(std::optional<double> v, int precision) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, *v);
  return buf;
}

}  // namespace

std::string format_table(const std::vector<MetricReport>& rows) {
  size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s %8s %8s %8s %8s %8s\n", static_cast<int>(width), "config", "PSNR",
                "SSIM", "L1", "LPIPS", "FID");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-*s %8s %8s %8s %8s %8s\n", static_cast<int>(width), r.label.c_str(),
                  fmt(r.psnr, 2).c_str(), fmt(r.ssim, 4).c_str(), fmt(r.l1, 4).c_str(), fmt(r.lpips, 4).c_str(),
                  fmt(r.fid, 2).c_str());
    out << line;
  }
  return out.str();
}

std::string to_csv(const std::vector<MetricReport>& rows) {
  std::ostringstream out;
  out << "config,psnr,ssim,l1,lpips,fid,n_samples\n";
  auto opt = [](std::optional<double> v) { return v ? fmt(v, 6) : std::string(); };
  for (const auto& r : rows) {
    out << r.label << "," << fmt(r.psnr, 6) << "," << fmt(r.ssim, 6) << "," << fmt(r.l1, 6) << ","
        << opt(r.lpips) << "," << opt(r.fid) << "," << r.n_samples << "\n";
  }
  return out.str();
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["config"] = r.label;
  j["psnr"] = r.psnr;
  j["ssim"] = r.ssim;
  j["l1"] = r.l1;
  j["lpips"] = r.lpips ? nlohmann::json(*r.lpips) : nlohmann::json();
  j["fid"] = r.fid ? nlohmann::json(*r.fid) : nlohmann::json();
  j["n_samples"] = r.n_samples;
  return j;
}

}  // namespace semfill
