#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "semfill/generator.hpp"
#include "semfill/discriminators.hpp"
#include "semfill/mask_gen.hpp"
#include "semfill/schedule.hpp"
#include "semfill/semantic.hpp"

namespace YAML {
class Node;
}

namespace semfill {

struct DataConfig {
  std::string root = "data/smoke";
  int resolution = 128;
  MaskSpec mask;
  /// Draw one mask per dataset image once and reuse it every step.
  bool fixed_masks = false;
  /// Boundary band radius; 0 scales 3 px at 128² to the resolution.
  int boundary_radius = 0;
};

struct TrainConfig {
  int epochs = 250;
  int64_t batch_size = 16;
  double g_lr = 1e-5;
  double d_lr = 5e-6;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double clip_norm = 0.5;
  bool mixed_precision = false;
  /// Stop after this many optimisation steps in total; 0 = no limit.
  int64_t max_steps = 0;
  int checkpoint_every = 10;
  int val_every = 1;
  std::string run_dir = "runs/default";

  void validate() const;
};

struct LossConfig {
  std::string perceptual = "vgg19";  // vgg19 | identity
  std::string vgg_weights = "weights/vgg19.pt";
  /// Permit the identity stub when VGG weights are absent (test profile).
  bool allow_stub = false;
};

struct SemanticConfig {
  SemanticProvider provider = SemanticProvider::None;
  /// Cluster colours when external labels are missing instead of failing.
  bool fallback_to_cluster = false;
};

struct EvalConfig {
  uint64_t mask_seed = 2024;
  int64_t batch_size = 16;
  double sigma = 0.0;
  std::string fid = "none";    // none | stub
  std::string lpips = "none";  // none | stub
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_path;
  size_t max_payload_bytes = 8u << 20;
  int workers = 4;
  int queue_limit = 8;
  std::string cors_origin = "*";
};

struct RunConfig {
  std::string workspace = ".";
  uint64_t seed = 1234;
  DataConfig data;
  GeneratorConfig generator;
  int64_t critic_channels = 64;
  SemanticConfig semantic;
  LossConfig losses;
  PhaseSchedule schedule;
  TrainConfig train;
  EvalConfig eval;
  ServiceConfig service;

  /// Pushes shared values (resolution, class count) into the nested
  /// configs and validates everything.
  void finalize();
  CriticConfig critic() const;
  /// `p` resolved against the workspace root when relative.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// One configurable key.
struct ConfigField {
  std::string key;  // dotted path, e.g. "train.g_lr"
  std::string doc;
  bool published = false;  // default taken from the published method
  std::function<void(RunConfig&, const YAML::Node&)> read;
  std::function<std::string(const RunConfig&)> show;  // YAML flow text
};

const std::vector<ConfigField>& config_fields();

/// Parses YAML text. `overrides` maps dotted keys to YAML scalars/flow
/// values and wins over the file. Unknown keys and bad values raise
/// ConfigError with the offending line.
RunConfig parse_config(const std::string& yaml_text,
                       const std::map<std::string, std::string>& overrides = {});

/// Reads a config file; its directory becomes the default workspace.
/// SEMFILL_DATA_ROOT, when set, replaces data.root.
RunConfig load_config(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& overrides = {});

/// Serialises every field as nested YAML (a complete snapshot).
std::string dump_config(const RunConfig& cfg);

/// Markdown table of keys, defaults and descriptions.
std::string config_reference();

}  // namespace semfill
