#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <memory>

#include "semfill/checkpoint.hpp"
#include "semfill/config.hpp"
#include "semfill/dataset.hpp"
#include "semfill/evaluate.hpp"
#include "semfill/losses.hpp"

namespace semfill {

/// Everything needed to continue a run. Randomness is derived from
/// (seed, global_step), so no generator state has to be stored.
struct TrainState {
  int epoch = 1;               // epoch in progress, 1-based
  int64_t batch_in_epoch = 0;  // next batch of `epoch`
  int64_t global_step = 0;
  double best_val_psnr = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  InpaintGenerator generator{nullptr};
  Critics critics{nullptr};
  std::unique_ptr<torch::optim::Adam> g_opt;
  std::unique_ptr<torch::optim::Adam> dg_opt, dl_opt, ds_opt;
};

struct StepReport {
  int epoch = 0;
  int64_t batch_idx = 0;
  int64_t step = 0;  // global step index of this update
  LossReport loss;
  bool critic_updated = false;
  double critic_loss = 0;  // sum over the three critics, penalties included
  double grad_norm = 0;     // generator gradient norm before clipping
  double clipped_norm = 0;  // after clipping
};

struct ValRecord {
  int epoch = 0;
  int64_t step = 0;
  MetricReport report;
};

struct FitOptions {
  /// Where checkpoints and the metric CSV go; empty disables all files.
  std::filesystem::path run_dir;
  std::function<void(const StepReport&)> on_step;
};

struct FitResult {
  int64_t steps = 0;  // updates performed by this call
  std::vector<ValRecord> validations;
  bool hit_step_limit = false;
};

class Trainer {
 public:
  Trainer(RunConfig cfg, std::shared_ptr<FeatureExtractor> perceptual);

  const RunConfig& config() const { return cfg_; }

  /// Fresh modules (initialised from the run seed) and optimisers.
  TrainState init_state() const;

  /// One generator update and, when the schedule says so for
  /// (state.epoch, batch_idx), one update of all three critics.
  StepReport train_step(TrainState& state, const Batch& batch, const MaskBatch& masks, int64_t batch_idx);

  /// Training masks for `batch` at the current step (fixed per image when
  /// data.fixed_masks is set).
  MaskBatch train_masks(const Batch& batch, const TrainState& state) const;
  /// Frozen evaluation masks, one per image of a set of `count` images.
  MaskBatch eval_masks(int64_t count) const;

  /// Runs epochs from where `state` stands. Validates every val_every
  /// epochs, checkpoints every checkpoint_every epochs and on a new best
  /// validation PSNR. A non-finite loss writes last_finite.ckpt and rethrows.
  FitResult fit(TrainState& state, const Dataset& train, const Dataset* val, const FitOptions& options = {});

  MetricReport validate(TrainState& state, const Dataset& val) const;

  void save(const std::filesystem::path& path, const TrainState& state) const;
  /// Restores a checkpoint written for a compatible configuration.
  TrainState load(const std::filesystem::path& path) const;
  Container to_container(const TrainState& state) const;
  void restore(TrainState& state, const Container& c) const;

  /// Skip all critic updates (supervised-only runs).
  void set_critics_frozen(bool frozen) { critics_frozen_ = frozen; }

 private:
  void save_with_retry(const std::filesystem::path& path, const TrainState& state) const;

  RunConfig cfg_;
  std::shared_ptr<FeatureExtractor> perceptual_;
  int boundary_radius_;
  bool critics_frozen_ = false;
};

/// Loads a split of data.root at the configured resolution, with label maps
/// when the external parser provides semantic supervision.
Dataset load_split(const RunConfig& cfg, Split split);

/// Mean hole-region L1 of the generator over `data` with the given masks.
double hole_l1(InpaintGenerator& generator, const Dataset& data, const MaskBatch& masks, double sigma = 0.0,
               uint64_t seed = 0);

/// Config snapshot stored in a checkpoint's metadata.
RunConfig checkpoint_config(const Container& c);

/// Inference-only bundle: generator weights and config, critics and
/// optimiser state stripped.
Container export_bundle(const Container& training_checkpoint);

struct LoadedModel {
  RunConfig config;
  InpaintGenerator generator{nullptr};
  std::string model_id;
};

/// Loads the generator from a training checkpoint or an export bundle.
LoadedModel load_model(const std::filesystem::path& path);

/// Generator weight digest; identical for a checkpoint and its export.
std::string model_id(const InpaintGenerator& generator);

}  // namespace semfill
