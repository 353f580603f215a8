#pragma once

#include "semfill/trainer.hpp"

namespace semfill {

struct AblationVariant {
  std::string label;
  EncoderMode mode = EncoderMode::Hybrid;
  bool attention = true;
};

/// hybrid+attn, hybrid only (attention removed), CNN only and ViT only.
/// The single-branch variants keep attention, so each row drops one part.
std::vector<AblationVariant> standard_ablations();

RunConfig apply_variant(RunConfig cfg, const AblationVariant& variant);

struct AblationOptions {
  int64_t steps = 100;  // training steps per variant
  std::filesystem::path run_dir;  // per-variant subdirectories; empty = no files
};

/// Trains each variant from the same seed for `steps` updates, then
/// evaluates it on `val` with the frozen evaluation masks.
std::vector<MetricReport> run_ablation(const RunConfig& base, const std::vector<AblationVariant>& variants,
                                       const Dataset& train, const Dataset& val,
                                       std::shared_ptr<FeatureExtractor> perceptual,
                                       const AblationOptions& options);

}  // namespace semfill
