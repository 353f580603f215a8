#include "semfill/semantic.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace semfill {

namespace F = torch::nn::functional;

SemanticDecoderImpl::SemanticDecoderImpl(const EncoderConfig& enc, int64_t num_classes) {
  if (num_classes < 2) throw Error("semantic decoder needs at least 2 classes");
  const int64_t b = enc.base_channels;
  // skip widths for blocks 1..4: quarter, half, full-res stem, raw 4-channel input
  const std::array<int64_t, 4> skip = {2 * b, b, b, 4};
  const std::array<int64_t, 4> up = {2, 2, 2, 1};
  int64_t in = enc.fused_width();
  for (size_t i = 0; i < 4; ++i) {
    const int64_t out = std::max<int64_t>(8, enc.fused_width() >> (i + 1));
    Block blk;
    blk.upsample = up[i];
    blk.conv1 = register_module("block" + std::to_string(i + 1) + "_conv1",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(in + skip[i], out, 3).padding(1)));
    blk.conv2 = register_module("block" + std::to_string(i + 1) + "_conv2",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1)));
    blocks_.push_back(blk);
    in = out;
  }
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, num_classes, 1)));
}

torch::Tensor SemanticDecoderImpl::run_block(Block& b, torch::Tensor x, const torch::Tensor& skip) {
  if (b.upsample != 1) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{double(b.upsample), double(b.upsample)})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  auto s = use_skips_ ? skip : torch::zeros_like(skip);
  x = torch::gelu(b.conv1(torch::cat({x, s}, 1)));
  return torch::gelu(b.conv2(x));
}

torch::Tensor SemanticDecoderImpl::logits(const EncoderOutput& enc, const MaskedInput& input) {
  auto x = enc.fused.data;
  x = run_block(blocks_[0], x, enc.skip_quarter);
  x = run_block(blocks_[1], x, enc.skip_half);
  x = run_block(blocks_[2], x, enc.skip_full);
  x = run_block(blocks_[3], x, input.network_input());
  return head_(x);
}

Stage1Impl::Stage1Impl(const EncoderConfig& enc, int64_t num_classes) : num_classes_(num_classes) {
  encoder_ = register_module("encoder", HybridEncoder(enc));
  decoder_ = register_module("decoder", SemanticDecoder(enc, num_classes));
}

Stage1Output Stage1Impl::forward(const MaskedInput& input) {
  auto enc = encoder_->forward(input);
  auto probs = torch::softmax(decoder_->logits(enc, input), 1);
  return Stage1Output{SemanticMap(probs), enc.fused};
}

SemanticProvider parse_semantic_provider(const std::string& name) {
  if (name == "none") return SemanticProvider::None;
  if (name == "external_parser") return SemanticProvider::ExternalParser;
  if (name == "color_cluster_fallback") return SemanticProvider::ColorCluster;
  throw Error("unknown semantic provider '" + name +
              "' (expected none, external_parser or color_cluster_fallback)");
}

std::string to_string(SemanticProvider provider) {
  switch (provider) {
    case SemanticProvider::None: return "none";
    case SemanticProvider::ExternalParser: return "external_parser";
    case SemanticProvider::ColorCluster: return "color_cluster_fallback";
  }
  return "none";
}

SemanticMap one_hot_labels(const torch::Tensor& labels, int64_t num_classes,
                           torch::ScalarType dtype) {
  if (labels.dim() != 3) throw ShapeError("label maps must be N×H×W");
  if (labels.numel() > 0 && (labels.min().item<int64_t>() < 0 ||
                             labels.max().item<int64_t>() >= num_classes)) {
    throw Error("label map contains a class index outside [0, " +
                std::to_string(num_classes) + ")");
  }
  auto oh = F::one_hot(labels.to(torch::kLong), num_classes).permute({0, 3, 1, 2});
  return SemanticMap(oh.to(dtype).contiguous());
}

torch::Tensor color_cluster_labels(const ImageBatch& image, int64_t num_classes, int iterations) {
  const int64_t n = image.batch(), h = image.height(), w = image.width();
  auto all = image.data().detach().to(torch::kDouble).permute({0, 2, 3, 1}).reshape({n, h * w, 3});
  std::vector<torch::Tensor> out;
  for (int64_t b = 0; b < n; ++b) {
    auto px = all[b];
    // farthest-point seeding starting from the first pixel
    std::vector<int64_t> seeds = {0};
    auto dist = (px - px[0]).pow(2).sum(1);
    while (static_cast<int64_t>(seeds.size()) < num_classes) {
      auto far = dist.argmax().item<int64_t>();
      seeds.push_back(far);
      dist = torch::minimum(dist, (px - px[far]).pow(2).sum(1));
    }
    auto centers = px.index_select(0, torch::tensor(seeds));
    torch::Tensor assign;
    for (int it = 0; it < iterations; ++it) {
      assign = torch::cdist(px, centers).argmin(1);
      auto next = centers.clone();
      for (int64_t k = 0; k < num_classes; ++k) {
        auto members = px.index({assign == k});
        if (members.size(0) > 0) next[k] = members.mean(0);
      }
      if (torch::allclose(next, centers)) break;
      centers = next;
    }
    assign = torch::cdist(px, centers).argmin(1);
    // order clusters by luminance so labels are stable across images
    auto lum = (centers * torch::tensor({0.299, 0.587, 0.114}, torch::kDouble)).sum(1);
    auto order = lum.argsort();
    auto rank = torch::empty_like(order);
    rank.index_put_({order}, torch::arange(num_classes));
    out.push_back(rank.index({assign}).reshape({h, w}));
  }
  return torch::stack(out);
}

std::optional<SemanticMap> pseudo_semantic_labels(const ImageBatch& image,
                                                  SemanticProvider provider,
                                                  int64_t num_classes,
                                                  const torch::Tensor& labels,
                                                  bool fallback_to_cluster) {
  const auto dtype = image.data().scalar_type();
  switch (provider) {
    case SemanticProvider::None:
      return std::nullopt;
    case SemanticProvider::ExternalParser:
      if (labels.defined()) {
        if (labels.size(0) != image.batch() || labels.size(1) != image.height() ||
            labels.size(2) != image.width()) {
          throw ShapeError("label maps do not match the image batch");
        }
        return one_hot_labels(labels, num_classes, dtype);
      }
      if (!fallback_to_cluster) throw Error("external semantic labels unavailable for this batch");
      [[fallthrough]];
    case SemanticProvider::ColorCluster:
      return one_hot_labels(color_cluster_labels(image, num_classes), num_classes, dtype);
  }
  return std::nullopt;
}

}  // namespace semfill
