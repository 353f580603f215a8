#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "semfill/ablation.hpp"
#include "semfill/core_data.hpp"
#include "semfill/image_io.hpp"
#include "semfill/log.hpp"
#include "semfill/mask_gen.hpp"
#include "semfill/service.hpp"
#include "semfill/trainer.hpp"

namespace fs = std::filesystem;

namespace semfill::cli {

namespace {

using Overrides = std::map<std::string, std::string>;

/// Adds one --<key> flag per config key to `cmd`, except where the command
/// already defines a flag of that name.
void add_config_flags(CLI::App* cmd, Overrides& overrides) {
  for (const auto& f : config_fields()) {
    const std::string key = f.key;
    if (cmd->get_option_no_throw("--" + key) != nullptr) continue;
    cmd->add_option_function<std::string>(
           "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, f.doc)
        ->group("Config overrides");
  }
}

RunConfig resolve_config(const std::string& path, const Overrides& overrides) {
  if (!path.empty()) return load_config(path, overrides);
  RunConfig cfg = parse_config("", overrides);
  cfg.workspace = fs::path(cfg.workspace).is_absolute() ? cfg.workspace
                                                        : (fs::current_path() / cfg.workspace).lexically_normal().string();
  if (const char* root = std::getenv("SEMFILL_DATA_ROOT"); root != nullptr && *root != '\0') cfg.data.root = root;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::shared_ptr<FeatureExtractor> perceptual_for(const RunConfig& cfg) {
  return make_perceptual_extractor(cfg.losses.perceptual, cfg.resolve(cfg.losses.vgg_weights),
                                   cfg.losses.allow_stub);
}

struct TrainArgs {
  std::string config;
  std::string resume;
  Overrides overrides;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = resolve_config(a.config, a.overrides);
  const fs::path run_dir = cfg.resolve(cfg.train.run_dir);
  fs::create_directories(run_dir);
  write_text(run_dir / "config.yaml", dump_config(cfg));

  Trainer trainer(cfg, perceptual_for(cfg));
  const Dataset train = load_split(cfg, Split::Train);
  std::optional<Dataset> val;
  try {
    val = load_split(cfg, Split::Val);
  } catch (const Error& e) {
    log::warn("no validation split (", e.what(), "); validation disabled");
  }

  TrainState state = a.resume.empty() ? trainer.init_state() : trainer.load(a.resume);
  if (!a.resume.empty()) {
    log::info("resuming from ", a.resume, " at epoch ", state.epoch, ", step ", state.global_step);
  }

  nlohmann::json run;
  run["encoder_mode"] = to_string(cfg.generator.encoder.mode);
  run["attention"] = cfg.generator.attention.enabled;
  run["seed"] = cfg.seed;
  run["resolution"] = cfg.data.resolution;
  run["num_classes"] = cfg.generator.num_classes;
  run["train_images"] = train.size();
  run["resumed_from"] = a.resume.empty() ? nlohmann::json() : nlohmann::json(a.resume);
  run["start_epoch"] = state.epoch;
  write_text(run_dir / "run.json", run.dump(2) + "\n");

  FitOptions fo;
  fo.run_dir = run_dir;
  fo.on_step = [](const StepReport& r) {
    if (r.step % 50 == 0) {
      log::info("step ", r.step, " epoch ", r.epoch, " rec ", r.loss.rec, " total ", r.loss.total,
                r.critic_updated ? " [critic]" : "");
    }
  };
  const FitResult res = trainer.fit(state, train, val ? &*val : nullptr, fo);
  run["end_epoch"] = state.epoch - (state.batch_in_epoch == 0 ? 1 : 0);
  run["global_step"] = state.global_step;
  run["model_id"] = model_id(state.generator);
  write_text(run_dir / "run.json", run.dump(2) + "\n");
  if (res.steps == 0) trainer.save(run_dir / "last.ckpt", state);
  std::cout << "trained " << res.steps << " steps; run directory " << run_dir.string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string split = "val";
  std::optional<uint64_t> seed;
  std::string out;
  Overrides overrides;
};

int cmd_eval(const EvalArgs& a) {
  LoadedModel model = load_model(a.checkpoint);
  RunConfig cfg = model.config;
  if (!a.config.empty() || !a.overrides.empty()) {
    RunConfig user = resolve_config(a.config, a.overrides);
    if (user.data.resolution != cfg.data.resolution) {
      throw ConfigError("resolution " + std::to_string(user.data.resolution) + " does not match the checkpoint (" +
                        std::to_string(cfg.data.resolution) + ")");
    }
    if (user.generator.num_classes != cfg.generator.num_classes) {
      throw ConfigError("num_classes " + std::to_string(user.generator.num_classes) +
                        " does not match the checkpoint (" + std::to_string(cfg.generator.num_classes) + ")");
    }
    user.generator = cfg.generator;
    cfg = user;
  }
  if (a.seed) cfg.eval.mask_seed = *a.seed;
  const Dataset data = load_split(cfg, parse_split(a.split));
  MaskSpec spec = cfg.data.mask;
  spec.seed = cfg.eval.mask_seed;
  const MaskBatch masks = generate_masks(spec, data.size(), cfg.data.resolution, cfg.data.resolution);
  GeneratorInpainter inpainter(model.generator, cfg.eval.sigma);
  MetricReport r = evaluate(inpainter, data, masks, make_eval_extractors(cfg.eval), cfg.eval.batch_size,
                            cfg.eval.mask_seed);
  r.label = to_string(cfg.generator.encoder.mode);
  std::cout << format_table({r});
  if (!a.out.empty()) {
    const fs::path out(a.out);
    write_text(out / "report.csv", to_csv({r}));
    nlohmann::json j = to_json(r);
    j["model_id"] = model.model_id;
    j["mask_seed"] = cfg.eval.mask_seed;
    write_text(out / "report.json", j.dump(2) + "\n");
    write_text(out / "report.txt", format_table({r}));
  }
  return kOk;
}

struct InferArgs {
  std::string checkpoint, image, mask, out_dir;
  double sigma = 0.0;
  int n_samples = 1;
  uint64_t seed = 0;
};

int cmd_infer(const InferArgs& a) {
  if (a.sigma < 0) throw Error("sigma must be >= 0");
  if (a.n_samples < 1) throw Error("n must be >= 1");
  LoadedModel model = load_model(a.checkpoint);
  cv::Mat rgb = read_rgb(a.image);
  MaskBatch mask = read_mask_png(a.mask);
  if (mask.height() != rgb.rows || mask.width() != rgb.cols) {
    throw Error("image and mask sizes differ");
  }
  const int64_t res = model.config.data.resolution;
  if (rgb.rows != res || rgb.cols != res) {
    log::warn("resizing inputs from ", rgb.cols, "x", rgb.rows, " to the model resolution ", res);
    rgb = resize_rgb(rgb, static_cast<int>(res));
    mask = resize_mask(mask, res);
  }
  const ImageBatch image(rgb_to_tensor(rgb));
  const auto input = make_masked_input(image, mask);
  fs::create_directories(a.out_dir);
  torch::NoGradGuard no_grad;
  for (int i = 0; i < a.n_samples; ++i) {
    const uint64_t seed = a.seed + static_cast<uint64_t>(i);
    auto out = model.generator->forward(input, a.sigma, make_generator(seed));
    char name[32];
    std::snprintf(name, sizeof(name), "result_%02d.png", i);
    write_rgb_png(fs::path(a.out_dir) / name, composite_rgb(rgb, out.prediction.data(), mask));
  }
  std::cout << "wrote " << a.n_samples << " composites to " << a.out_dir << "\n";
  return kOk;
}

struct MaskGenArgs {
  std::string config;
  std::string out_dir;
  int64_t n = 1;
  int64_t size = 0;
  std::optional<uint64_t> seed;
  Overrides overrides;
};

int cmd_mask_gen(const MaskGenArgs& a) {
  const RunConfig cfg = resolve_config(a.config, a.overrides);
  MaskSpec spec = cfg.data.mask;
  spec.seed = a.seed ? *a.seed : cfg.seed;
  const int64_t size = a.size > 0 ? a.size : cfg.data.resolution;
  const MaskBatch masks = generate_masks(spec, a.n, size, size);
  const auto ratios = masks.ratio();
  fs::create_directories(a.out_dir);
  for (int64_t i = 0; i < a.n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%04lld.png", static_cast<long long>(i));
    write_mask_png(fs::path(a.out_dir) / name, masks, i);
    std::cout << name << " " << ratios[i].item<double>() << "\n";
  }
  return kOk;
}

int cmd_export(const std::string& checkpoint, const std::string& out) {
  const Container bundle = export_bundle(read_container(checkpoint));
  write_container(out, bundle, {{"source", fs::path(checkpoint).filename().string()}});
  std::cout << "exported " << bundle.blocks.size() << " generator blocks (model "
            << bundle.meta.value("model_id", std::string("?")) << ") to " << out << "\n";
  return kOk;
}

std::atomic<bool> g_stop{false};

struct ServeArgs {
  std::string config;
  std::string model;
  Overrides overrides;
};

int cmd_serve(const ServeArgs& a) {
  const RunConfig cfg = resolve_config(a.config, a.overrides);
  InpaintService service(cfg.service);
  const std::string model_path = !a.model.empty() ? a.model : cfg.resolve(cfg.service.model_path).string();
  if (model_path.empty()) throw ConfigError("no model: pass --model or set service.model_path");
  const int port = service.start(cfg.service.port);
  service.load(model_path);
  std::cout << "listening on " << cfg.service.host << ":" << port << " (model " << service.model_id() << ")"
            << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  service.stop();
  return kOk;
}

struct AblateArgs {
  std::string config;
  int64_t steps = 50;
  std::string out;
  Overrides overrides;
};

int cmd_ablate(const AblateArgs& a) {
  const RunConfig cfg = resolve_config(a.config, a.overrides);
  const Dataset train = load_split(cfg, Split::Train);
  const Dataset val = load_split(cfg, Split::Val);
  AblationOptions opt;
  opt.steps = a.steps;
  if (!a.out.empty()) opt.run_dir = a.out;
  const auto rows = run_ablation(cfg, standard_ablations(), train, val, perceptual_for(cfg), opt);
  std::cout << format_table(rows);
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "ablation.txt", format_table(rows));
    write_text(fs::path(a.out) / "ablation.csv", to_csv(rows));
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    write_text(fs::path(a.out) / "ablation.json", j.dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Semantic-guided two-stage face inpainting"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model from a run config");
  t->add_option("--config,-c", train.config, "Run config (YAML)")->required();
  t->add_option("--resume", train.resume, "Training checkpoint to continue from");
  add_config_flags(t, train.overrides);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  e->add_option("--checkpoint", eval.checkpoint, "Training checkpoint or export bundle")->required();
  e->add_option("--config,-c", eval.config, "Run config for data and eval settings (default: checkpoint snapshot)");
  e->add_option("--split", eval.split, "train or val");
  e->add_option("--seed", eval.seed, "Evaluation mask seed");
  e->add_option("--out", eval.out, "Directory for report.csv/json/txt");
  add_config_flags(e, eval.overrides);

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Inpaint one image");
  i->add_option("--checkpoint", infer.checkpoint, "Training checkpoint or export bundle")->required();
  i->add_option("--image", infer.image, "Input image")->required();
  i->add_option("--mask", infer.mask, "Mask PNG (255 = missing)")->required();
  i->add_option("--sigma", infer.sigma, "Noise level; 0 gives identical samples");
  i->add_option("--n", infer.n_samples, "Number of samples");
  i->add_option("--seed", infer.seed, "Seed of the first sample; sample k uses seed + k");
  i->add_option("--out-dir", infer.out_dir, "Output directory")->required();

  MaskGenArgs masks;
  auto* m = app.add_subcommand("mask-gen", "Write free-form masks as PNGs");
  m->add_option("--config,-c", masks.config, "Run config providing data.mask");
  m->add_option("--n", masks.n, "Number of masks")->check(CLI::PositiveNumber);
  m->add_option("--size", masks.size, "Mask side length (default data.resolution)");
  m->add_option("--seed", masks.seed, "Mask seed (default: run seed)");
  m->add_option("--out-dir", masks.out_dir, "Output directory")->required();
  add_config_flags(m, masks.overrides);

  std::string export_ckpt, export_out;
  auto* x = app.add_subcommand("export", "Strip critics and optimiser state for serving");
  x->add_option("--checkpoint", export_ckpt, "Training checkpoint")->required();
  x->add_option("--out", export_out, "Bundle path")->required();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the HTTP inference service");
  s->add_option("--config,-c", serve.config, "Run config providing the service block");
  s->add_option("--model", serve.model, "Export bundle (default service.model_path)");
  add_config_flags(s, serve.overrides);

  AblateArgs ablate;
  auto* ab = app.add_subcommand("ablate", "Train and evaluate the four encoder/attention variants");
  ab->add_option("--config,-c", ablate.config, "Run config")->required();
  ab->add_option("--steps", ablate.steps, "Training steps per variant")->check(CLI::PositiveNumber);
  ab->add_option("--out", ablate.out, "Directory for the table and per-variant runs");
  add_config_flags(ab, ablate.overrides);

  std::string doc_out;
  auto* d = app.add_subcommand("config-doc", "Print the config key reference (Markdown)");
  d->add_option("--out", doc_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (log_level == "debug") log::threshold() = log::Level::Debug;
    else if (log_level == "info") log::threshold() = log::Level::Info;
    else if (log_level == "warn") log::threshold() = log::Level::Warn;
    else if (log_level == "error") log::threshold() = log::Level::Error;
    else if (log_level == "off") log::threshold() = log::Level::Off;
    else throw CLI::ValidationError("--log-level", "unknown level " + log_level);

    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*i) return cmd_infer(infer);
    if (*m) return cmd_mask_gen(masks);
    if (*x) return cmd_export(export_ckpt, export_out);
    if (*s) return cmd_serve(serve);
    if (*ab) return cmd_ablate(ablate);
    if (*d) {
      if (doc_out.empty()) {
        std::cout << config_reference();
      } else {
        write_text(doc_out, config_reference());
      }
      return kOk;
    }
  } catch (const CLI::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace semfill::cli
