#include "semfill/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace semfill {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("train.epochs must be >= 0");
  if (batch_size < 1) throw Error("train.batch_size must be >= 1");
  if (!(g_lr > 0) || !(d_lr > 0)) throw Error("train: learning rates must be > 0");
  if (!(clip_norm > 0)) throw Error("train.clip_norm must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw Error("train: Adam betas must lie in [0, 1)");
  }
  if (max_steps < 0) throw Error("train.max_steps must be >= 0");
  if (checkpoint_every < 1 || val_every < 1) {
    throw Error("train: checkpoint_every and val_every must be >= 1");
  }
}

void RunConfig::finalize() {
  generator.encoder.image_size = data.resolution;
  data.mask.validate();
  generator.encoder.validate();
  generator.attention.validate(data.resolution / 8);
  if (generator.num_classes < 2) throw Error("model.num_classes must be >= 2");
  if (generator.noise.sigma < 0) throw Error("model.noise.sigma must be >= 0");
  if (critic_channels < 1) throw Error("model.critic_channels must be >= 1");
  if (data.resolution % 16 != 0) throw Error("data.resolution must be divisible by 16");
  if (losses.perceptual != "vgg19" && losses.perceptual != "identity") {
    throw Error("losses.perceptual must be vgg19 or identity");
  }
  for (const auto* name : {&eval.fid, &eval.lpips}) {
    if (*name != "none" && *name != "stub") throw Error("eval.fid/eval.lpips must be none or stub");
  }
  if (eval.batch_size < 1) throw Error("eval.batch_size must be >= 1");
  if (eval.sigma < 0) throw Error("eval.sigma must be >= 0");
  if (service.workers < 1 || service.queue_limit < 0) throw Error("service: bad worker/queue sizes");
  schedule.validate();
  train.validate();
}

CriticConfig RunConfig::critic() const {
  CriticConfig c;
  c.image_size = data.resolution;
  c.base_channels = critic_channels;
  c.num_classes = generator.num_classes;
  return c;
}

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return fs::path(workspace) / p;
}

namespace {

int line_of(const YAML::Mark& m) { return m.is_null() ? -1 : m.line + 1; }
int column_of(const YAML::Mark& m) { return m.is_null() ? -1 : m.column + 1; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  const YAML::Mark m = node.Mark();
  throw ConfigError(message, line_of(m), column_of(m));
}

template <typename T>
T convert(const YAML::Node& node, const std::string& key, const char* type_name) {
  if (!node.IsScalar() && !node.IsSequence()) fail(node, key + ": expected " + type_name);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, key + ": expected " + type_name + ", got '" +
                   (node.IsScalar() ? node.Scalar() : std::string("[...]")) + "'");
  }
}

std::string show_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

template <typename T>
std::string show_value(const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    return show_double(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    YAML::Emitter e;
    e << YAML::DoubleQuoted << v;
    return e.c_str();
  } else {
    return std::to_string(v);
  }
}

template <typename T>
std::string type_name() {
  if constexpr (std::is_same_v<T, double>) return "a number";
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  if constexpr (std::is_same_v<T, std::string>) return "a string";
  return "an integer";
}

template <typename T, typename Access>
ConfigField scalar(std::string key, Access access, std::string doc, bool published = false) {
  ConfigField f;
  f.key = key;
  f.doc = std::move(doc);
  f.published = published;
  f.read = [access, key](RunConfig& c, const YAML::Node& n) {
    if (!n.IsScalar()) fail(n, key + ": expected " + type_name<T>());
    access(c) = convert<T>(n, key, type_name<T>().c_str());
  };
  f.show = [access](const RunConfig& c) { return show_value(access(const_cast<RunConfig&>(c))); };
  return f;
}

template <typename T, typename Access>
ConfigField list(std::string key, Access access, std::string doc, bool published = false,
                 size_t fixed_size = 0) {
  ConfigField f;
  f.key = key;
  f.doc = std::move(doc);
  f.published = published;
  f.read = [access, key, fixed_size](RunConfig& c, const YAML::Node& n) {
    if (!n.IsSequence()) fail(n, key + ": expected a list");
    auto values = convert<std::vector<T>>(n, key, "a list of numbers");
    if (fixed_size != 0 && values.size() != fixed_size) {
      fail(n, key + ": expected exactly " + std::to_string(fixed_size) + " entries");
    }
    auto& target = access(c);
    if constexpr (requires { target.resize(0); }) {
      target.assign(values.begin(), values.end());
    } else {
      std::copy(values.begin(), values.end(), target.begin());
    }
  };
  f.show = [access](const RunConfig& c) {
    std::string out = "[";
    bool first = true;
    for (const auto& v : access(const_cast<RunConfig&>(c))) {
      if (!first) out += ", ";
      first = false;
      out += show_value(static_cast<T>(v));
    }
    return out + "]";
  };
  return f;
}

template <typename Parse, typename Show, typename Access>
ConfigField choice(std::string key, Access access, Parse parse, Show show, std::string doc,
                   bool published = false) {
  ConfigField f;
  f.key = key;
  f.doc = std::move(doc);
  f.published = published;
  f.read = [access, parse, key](RunConfig& c, const YAML::Node& n) {
    const auto text = convert<std::string>(n, key, "a string");
    try {
      access(c) = parse(text);
    } catch (const Error& e) {
      fail(n, key + ": " + e.what());
    }
  };
  f.show = [access, show](const RunConfig& c) {
    return show_value(show(access(const_cast<RunConfig&>(c))));
  };
  return f;
}

#define ACCESS(expr) [](RunConfig& c) -> auto& { return c.expr; }

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  f.push_back(scalar<std::string>("workspace", ACCESS(workspace),
                                  "Root for relative paths; defaults to the config file's directory"));
  f.push_back(scalar<uint64_t>("seed", ACCESS(seed), "Master seed for every random stream"));

  f.push_back(scalar<std::string>("data.root", ACCESS(data.root),
                                  "Dataset root with train/ and val/ (SEMFILL_DATA_ROOT overrides)"));
  f.push_back(scalar<int>("data.resolution", ACCESS(data.resolution), "Square training resolution", true));
  f.push_back(scalar<double>("data.mask.ratio_min", ACCESS(data.mask.ratio_min),
                             "Lowest accepted occlusion ratio", true));
  f.push_back(scalar<double>("data.mask.ratio_max", ACCESS(data.mask.ratio_max),
                             "Highest accepted occlusion ratio", true));
  f.push_back(scalar<int>("data.mask.strokes_min", ACCESS(data.mask.strokes_min), "Fewest strokes per mask"));
  f.push_back(scalar<int>("data.mask.strokes_max", ACCESS(data.mask.strokes_max), "Most strokes per mask"));
  f.push_back(scalar<int>("data.mask.vertices_min", ACCESS(data.mask.vertices_min), "Fewest polyline vertices"));
  f.push_back(scalar<int>("data.mask.vertices_max", ACCESS(data.mask.vertices_max), "Most polyline vertices"));
  f.push_back(scalar<double>("data.mask.brush_min", ACCESS(data.mask.brush_min), "Thinnest brush at 128² (px)"));
  f.push_back(scalar<double>("data.mask.brush_max", ACCESS(data.mask.brush_max), "Thickest brush at 128² (px)"));
  f.push_back(scalar<int>("data.mask.max_attempts", ACCESS(data.mask.max_attempts),
                          "Rejection-sampling attempts before giving up"));
  f.push_back(scalar<bool>("data.fixed_masks", ACCESS(data.fixed_masks),
                           "Reuse one mask per training image for the whole run"));
  f.push_back(scalar<int>("data.boundary_radius", ACCESS(data.boundary_radius),
                          "Boundary band radius for the context loss; 0 = 3 px scaled from 128²"));

  f.push_back(choice("model.encoder.mode", ACCESS(generator.encoder.mode), parse_encoder_mode,
                     [](EncoderMode m) { return to_string(m); },
                     "Encoder ablation: hybrid, cnn_only or vit_only", true));
  f.push_back(scalar<int64_t>("model.encoder.base_channels", ACCESS(generator.encoder.base_channels),
                              "CNN branch width at full resolution"));
  f.push_back(scalar<int64_t>("model.encoder.vit_layers", ACCESS(generator.encoder.vit_layers),
                              "Transformer blocks in the ViT branch"));
  f.push_back(scalar<int64_t>("model.encoder.vit_heads", ACCESS(generator.encoder.vit_heads), "Attention heads"));
  f.push_back(scalar<int64_t>("model.encoder.vit_dim", ACCESS(generator.encoder.vit_dim), "Token width"));
  f.push_back(scalar<int64_t>("model.encoder.patch_size", ACCESS(generator.encoder.patch_size),
                              "ViT patch size (px)"));
  f.push_back(scalar<int64_t>("model.encoder.fused_channels", ACCESS(generator.encoder.fused_channels),
                              "Fused feature width; 0 = 4 × base_channels"));
  f.push_back(scalar<int64_t>("model.num_classes", ACCESS(generator.num_classes), "Semantic classes K", true));
  f.push_back(scalar<int64_t>("model.semantic_channels", ACCESS(generator.semantic_channels),
                              "Width of the projected semantic map in stage 2"));
  f.push_back(scalar<bool>("model.attention.enabled", ACCESS(generator.attention.enabled),
                           "Multi-scale contextual attention in stage 2", true));
  f.push_back(list<int64_t>("model.attention.scales", ACCESS(generator.attention.scales),
                            "Attention pooling factors on the 1/8 feature grid", true));
  f.push_back(scalar<int64_t>("model.attention.key_dim", ACCESS(generator.attention.key_dim),
                              "Query/key projection width"));
  f.push_back(scalar<bool>("model.attention.hole_pairs_only", ACCESS(generator.attention.hole_pairs_only),
                           "Zero only hole-to-hole pairs without renormalising instead of masking all missing keys"));
  f.push_back(scalar<double>("model.noise.sigma", ACCESS(generator.noise.sigma),
                             "Training noise standard deviation", true));
  f.push_back(scalar<double>("model.noise.alpha_init", ACCESS(generator.noise.alpha_init),
                             "Initial learnable noise scale per layer"));
  f.push_back(scalar<int64_t>("model.critic_channels", ACCESS(critic_channels), "Critic base width"));

  f.push_back(choice("semantic.provider", ACCESS(semantic.provider), parse_semantic_provider,
                     [](SemanticProvider p) { return to_string(p); },
                     "Semantic supervision: none, external_parser or color_cluster_fallback"));
  f.push_back(scalar<bool>("semantic.fallback_to_cluster", ACCESS(semantic.fallback_to_cluster),
                           "Use colour clusters when an external label map is missing"));

  f.push_back(scalar<std::string>("losses.perceptual", ACCESS(losses.perceptual),
                                  "Perceptual feature extractor: vgg19 or identity"));
  f.push_back(scalar<std::string>("losses.vgg_weights", ACCESS(losses.vgg_weights),
                                  "Exported VGG-19 feature weights"));
  f.push_back(scalar<bool>("losses.allow_stub", ACCESS(losses.allow_stub),
                           "Fall back to the identity extractor when weights are missing"));
  f.push_back(scalar<double>("losses.w_sem", ACCESS(schedule.final_weights.w_sem),
                             "Final semantic loss weight", true));
  f.push_back(scalar<double>("losses.w_perc", ACCESS(schedule.final_weights.w_perc),
                             "Final perceptual loss weight", true));
  f.push_back(scalar<double>("losses.w_ctx", ACCESS(schedule.final_weights.w_ctx),
                             "Final context loss weight", true));
  f.push_back(scalar<double>("losses.w_adv", ACCESS(schedule.final_weights.w_adv),
                             "Final adversarial loss weight", true));
  f.push_back(scalar<double>("losses.w_gp", ACCESS(schedule.final_weights.w_gp),
                             "Gradient penalty weight per critic", true));
  f.push_back(list<double>("losses.level_weights", ACCESS(schedule.final_weights.level_weights),
                           "Perceptual weights for relu1_2, relu2_2, relu3_4, relu4_4", false, 4));

  f.push_back(scalar<int>("schedule.warmup_end", ACCESS(schedule.warmup_end), "Last warm-up epoch", true));
  f.push_back(scalar<int>("schedule.ramp_end", ACCESS(schedule.ramp_end), "Last ramp epoch", true));
  f.push_back(list<int>("schedule.critic_every", ACCESS(schedule.critic_every),
                        "Critic update period per phase (batches)", true, 3));
  f.push_back(scalar<double>("schedule.warmup_adv", ACCESS(schedule.warmup_adv),
                             "Adversarial weight during warm-up", true));
  f.push_back(scalar<double>("schedule.ramp_sem_slope", ACCESS(schedule.ramp_sem_slope),
                             "Ramp: w_sem = slope · α", true));
  f.push_back(scalar<double>("schedule.ramp_perc_base", ACCESS(schedule.ramp_perc_base),
                             "Ramp: w_perc = base + slope · α", true));
  f.push_back(scalar<double>("schedule.ramp_perc_slope", ACCESS(schedule.ramp_perc_slope),
                             "Ramp: w_perc = base + slope · α", true));
  f.push_back(scalar<double>("schedule.ramp_ctx_slope", ACCESS(schedule.ramp_ctx_slope),
                             "Ramp: w_ctx = slope · α", true));

  f.push_back(scalar<int>("train.epochs", ACCESS(train.epochs), "Training epochs", true));
  f.push_back(scalar<int64_t>("train.batch_size", ACCESS(train.batch_size), "Images per step", true));
  f.push_back(scalar<double>("train.g_lr", ACCESS(train.g_lr), "Generator Adam learning rate", true));
  f.push_back(scalar<double>("train.d_lr", ACCESS(train.d_lr), "Critic Adam learning rate", true));
  f.push_back(scalar<double>("train.beta1", ACCESS(train.beta1), "Adam β1 (all optimisers)", true));
  f.push_back(scalar<double>("train.beta2", ACCESS(train.beta2), "Adam β2 (all optimisers)", true));
  f.push_back(scalar<double>("train.clip_norm", ACCESS(train.clip_norm),
                             "Generator gradient global-norm clip", true));
  f.push_back(scalar<bool>("train.mixed_precision", ACCESS(train.mixed_precision),
                           "bfloat16 autocast on CPU; off keeps runs bit-deterministic"));
  f.push_back(scalar<int64_t>("train.max_steps", ACCESS(train.max_steps), "Stop after this many steps; 0 = no limit"));
  f.push_back(scalar<int>("train.checkpoint_every", ACCESS(train.checkpoint_every), "Checkpoint period (epochs)"));
  f.push_back(scalar<int>("train.val_every", ACCESS(train.val_every), "Validation period (epochs)"));
  f.push_back(scalar<std::string>("train.run_dir", ACCESS(train.run_dir), "Output directory for a training run"));

  f.push_back(scalar<uint64_t>("eval.mask_seed", ACCESS(eval.mask_seed), "Seed of the frozen evaluation masks"));
  f.push_back(scalar<int64_t>("eval.batch_size", ACCESS(eval.batch_size), "Images per evaluation batch"));
  f.push_back(scalar<double>("eval.sigma", ACCESS(eval.sigma), "Noise level during evaluation"));
  f.push_back(scalar<std::string>("eval.fid", ACCESS(eval.fid), "FID feature extractor: none or stub"));
  f.push_back(scalar<std::string>("eval.lpips", ACCESS(eval.lpips), "LPIPS distance: none or stub"));

  f.push_back(scalar<std::string>("service.host", ACCESS(service.host), "Bind address"));
  f.push_back(scalar<int>("service.port", ACCESS(service.port), "Listen port"));
  f.push_back(scalar<std::string>("service.model_path", ACCESS(service.model_path), "Export bundle to serve"));
  f.push_back(scalar<size_t>("service.max_payload_bytes", ACCESS(service.max_payload_bytes),
                             "Largest accepted request body"));
  f.push_back(scalar<int>("service.workers", ACCESS(service.workers), "Concurrent inference workers"));
  f.push_back(scalar<int>("service.queue_limit", ACCESS(service.queue_limit),
                          "Requests allowed to wait before answering 429"));
  f.push_back(scalar<std::string>("service.cors_origin", ACCESS(service.cors_origin), "Allowed CORS origin"));
  return f;
}

#undef ACCESS

const ConfigField* find_field(const std::string& key) {
  for (const auto& f : config_fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool is_prefix(const std::string& prefix) {
  for (const auto& f : config_fields()) {
    if (f.key.size() > prefix.size() && f.key.compare(0, prefix.size(), prefix) == 0 &&
        f.key[prefix.size()] == '.') {
      return true;
    }
  }
  return false;
}

void walk(const YAML::Node& map, const std::string& prefix, RunConfig& cfg, std::set<std::string>& seen) {
  for (auto it = map.begin(); it != map.end(); ++it) {
    const std::string name = it->first.as<std::string>();
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (const ConfigField* field = find_field(key)) {
      if (!seen.insert(key).second) fail(it->first, "duplicate key '" + key + "'");
      field->read(cfg, it->second);
    } else if (is_prefix(key)) {
      if (!it->second.IsMap()) fail(it->second, "'" + key + "' must be a mapping");
      walk(it->second, key, cfg, seen);
    } else {
      fail(it->first, "unknown key '" + key + "'");
    }
  }
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

RunConfig parse_config(const std::string& yaml_text, const std::map<std::string, std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, line_of(e.mark), column_of(e.mark));
  }
  RunConfig cfg;
  std::set<std::string> seen;
  if (root.IsDefined() && !root.IsNull()) {
    if (!root.IsMap()) fail(root, "top level must be a mapping");
    walk(root, "", cfg, seen);
  }
  for (const auto& [key, value] : overrides) {
    const ConfigField* field = find_field(key);
    if (field == nullptr) throw ConfigError("unknown override key '" + key + "'");
    YAML::Node node;
    try {
      node = YAML::Load(value);
    } catch (const YAML::ParserException& e) {
      throw ConfigError("--" + key + ": " + e.msg);
    }
    try {
      field->read(cfg, node);
    } catch (const ConfigError& e) {
      throw ConfigError("--" + key + "=" + value + ": " + e.what());
    }
  }
  try {
    cfg.finalize();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), overrides);
  const fs::path base = fs::absolute(path).parent_path();
  cfg.workspace = fs::path(cfg.workspace).is_absolute() ? cfg.workspace : (base / cfg.workspace).lexically_normal().string();
  if (const char* root = std::getenv("SEMFILL_DATA_ROOT"); root != nullptr && *root != '\0') {
    cfg.data.root = root;
  }
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::vector<std::string> open;  // currently open nesting path
  for (const auto& f : config_fields()) {
    std::vector<std::string> parts;
    std::stringstream ks(f.key);
    for (std::string p; std::getline(ks, p, '.');) parts.push_back(p);
    size_t common = 0;
    while (common < open.size() && common + 1 < parts.size() && open[common] == parts[common]) ++common;
    open.resize(common);
    for (size_t i = common; i + 1 < parts.size(); ++i) {
      out << std::string(2 * i, ' ') << parts[i] << ":\n";
      open.push_back(parts[i]);
    }
    out << std::string(2 * (parts.size() - 1), ' ') << parts.back() << ": " << f.show(cfg) << "\n";
  }
  return out.str();
}

std::string config_reference() {
  const RunConfig defaults;
  std::ostringstream out;
  out << "| key | default | description |\n|---|---|---|\n";
  for (const auto& f : config_fields()) {
    out << "| `" << f.key << "` | `" << f.show(defaults) << "` | " << f.doc;
    if (f.published) out << " (published default)";
    out << " |\n";
  }
  return out.str();
}

}  // namespace semfill
