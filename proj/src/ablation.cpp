#include "semfill/ablation.hpp"

#include "semfill/log.hpp"

namespace semfill {

std::vector<AblationVariant> standard_ablations() {
  return {
      {"hybrid+attn", EncoderMode::Hybrid, true},
      {"hybrid only", EncoderMode::Hybrid, false},
      {"CNN only", EncoderMode::CnnOnly, true},
      {"ViT only", EncoderMode::VitOnly, true},
  };
}

RunConfig apply_variant(RunConfig cfg, const AblationVariant& variant) {
  cfg.generator.encoder.mode = variant.mode;
  cfg.generator.attention.enabled = variant.attention;
  cfg.finalize();
  return cfg;
}

std::vector<MetricReport> run_ablation(const RunConfig& base, const std::vector<AblationVariant>& variants,
                                       const Dataset& train, const Dataset& val,
                                       std::shared_ptr<FeatureExtractor> perceptual,
                                       const AblationOptions& options) {
  std::vector<MetricReport> rows;
  for (const auto& v : variants) {
    RunConfig cfg = apply_variant(base, v);
    cfg.train.max_steps = options.steps;
    // enough epochs to reach the step budget
    const auto per_epoch = (train.size() + cfg.train.batch_size - 1) / cfg.train.batch_size;
    cfg.train.epochs = std::max<int>(cfg.train.epochs, static_cast<int>((options.steps + per_epoch - 1) / per_epoch));
    cfg.train.val_every = cfg.train.epochs + 1;
    cfg.train.checkpoint_every = cfg.train.epochs + 1;
    Trainer trainer(cfg, perceptual);
    TrainState state = trainer.init_state();
    FitOptions fo;
    if (!options.run_dir.empty()) {
      std::string dir = v.label;
      for (auto& ch : dir) {
        if (ch == ' ' || ch == '+') ch = '_';
      }
      fo.run_dir = options.run_dir / dir;
    }
    log::info("ablation: training '", v.label, "' for ", options.steps, " steps");
    trainer.fit(state, train, nullptr, fo);
    MetricReport r = trainer.validate(state, val);
    r.label = v.label;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace semfill
