#include "semfill/trainer.hpp"

#include <ATen/autocast_mode.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <thread>

#include "semfill/core_data.hpp"
#include "semfill/log.hpp"
#include "semfill/mask_gen.hpp"

namespace fs = std::filesystem;

namespace semfill {

namespace {

// Independent random streams derived from the run seed.
constexpr uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr uint64_t kPenaltyStream = 0x70656e616c7479ULL;
constexpr uint64_t kMaskStream = 0x6d61736b73ULL;
constexpr uint64_t kFixedMaskStream = 0x6669786564ULL;
constexpr uint64_t kShuffleStream = 0x73687566ULL;

class AutocastScope {
 public:
  explicit AutocastScope(bool enabled) : enabled_(enabled) {
    if (!enabled_) return;
    previous_ = at::autocast::is_autocast_enabled(at::kCPU);
    at::autocast::set_autocast_dtype(at::kCPU, at::kBFloat16);
    at::autocast::set_autocast_enabled(at::kCPU, true);
  }
  ~AutocastScope() {
    if (!enabled_) return;
    at::autocast::set_autocast_enabled(at::kCPU, previous_);
    at::autocast::clear_cache();
  }
  AutocastScope(const AutocastScope&) = delete;
  AutocastScope& operator=(const AutocastScope&) = delete;

 private:
  bool enabled_;
  bool previous_ = false;
};

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.requires_grad_(flag);
}

double grad_norm(const std::vector<torch::Tensor>& params) {
  double sq = 0;
  for (const auto& p : params) {
    if (p.grad().defined()) sq += p.grad().to(torch::kDouble).pow(2).sum().item<double>();
  }
  return std::sqrt(sq);
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, double lr, const TrainConfig& t) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(lr).betas({t.beta1, t.beta2}));
}

void append_adam(std::vector<NamedTensor>& blocks, const std::string& prefix, const torch::optim::Adam& opt,
                 const torch::nn::Module& module) {
  const auto& state = opt.state();
  for (const auto& p : module.named_parameters(true)) {
    auto it = state.find(p.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
    blocks.push_back({prefix + "." + p.key() + ".step", torch::tensor(st.step(), torch::kLong)});
    blocks.push_back({prefix + "." + p.key() + ".exp_avg", st.exp_avg()});
    blocks.push_back({prefix + "." + p.key() + ".exp_avg_sq", st.exp_avg_sq()});
  }
}

void restore_adam(const Container& c, const std::string& prefix, torch::optim::Adam& opt,
                  const torch::nn::Module& module) {
  auto& state = opt.state();
  state.clear();
  for (const auto& p : module.named_parameters(true)) {
    const std::string base = prefix + "." + p.key();
    const torch::Tensor* step = c.find(base + ".step");
    if (step == nullptr) continue;
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(step->item<int64_t>());
    st->exp_avg(c.at(base + ".exp_avg").clone());
    st->exp_avg_sq(c.at(base + ".exp_avg_sq").clone());
    state[p.value().unsafeGetTensorImpl()] = std::move(st);
  }
}

std::string csv_header() {
  return "step,epoch,batch,phase,rec,sem,perc,ctx,adv,total,w_sem,w_perc,w_ctx,w_adv,critic_updated,"
         "critic_loss,grad_norm,clipped_norm,val_psnr,val_ssim,val_l1\n";
}

std::string csv_row(const StepReport& r, int phase) {
  std::ostringstream o;
  o.precision(9);
  const auto& l = r.loss;
  o << r.step << "," << r.epoch << "," << r.batch_idx << "," << phase << "," << l.rec << "," << l.sem << ","
    << l.perc << "," << l.ctx << "," << l.adv << "," << l.total << "," << l.weights.w_sem << ","
    << l.weights.w_perc << "," << l.weights.w_ctx << "," << l.weights.w_adv << "," << (r.critic_updated ? 1 : 0)
    << "," << r.critic_loss << "," << r.grad_norm << "," << r.clipped_norm << ",,,\n";
  return o.str();
}

std::string csv_val_row(const ValRecord& v) {
  std::ostringstream o;
  o.precision(9);
  o << v.step << "," << v.epoch << ",,,,,,,,,,,,,,,,," << v.report.psnr << "," << v.report.ssim << ","
    << v.report.l1 << "\n";
  return o.str();
}

}  // namespace

Trainer::Trainer(RunConfig cfg, std::shared_ptr<FeatureExtractor> perceptual)
    : cfg_(std::move(cfg)), perceptual_(std::move(perceptual)) {
  if (!perceptual_) throw Error("Trainer: a perceptual feature extractor is required");
  boundary_radius_ =
      cfg_.data.boundary_radius > 0 ? cfg_.data.boundary_radius : default_boundary_radius(cfg_.data.resolution);
}

TrainState Trainer::init_state() const {
  torch::manual_seed(cfg_.seed);
  TrainState s;
  s.generator = InpaintGenerator(cfg_.generator);
  s.critics = Critics(cfg_.critic());
  s.g_opt = std::make_unique<torch::optim::Adam>(make_adam(s.generator->parameters(), cfg_.train.g_lr, cfg_.train));
  s.dg_opt = std::make_unique<torch::optim::Adam>(
      make_adam(s.critics->global->parameters(), cfg_.train.d_lr, cfg_.train));
  s.dl_opt = std::make_unique<torch::optim::Adam>(
      make_adam(s.critics->local->parameters(), cfg_.train.d_lr, cfg_.train));
  s.ds_opt = std::make_unique<torch::optim::Adam>(
      make_adam(s.critics->semantic->parameters(), cfg_.train.d_lr, cfg_.train));
  return s;
}

MaskBatch Trainer::train_masks(const Batch& batch, const TrainState& state) const {
  const int64_t res = cfg_.data.resolution;
  MaskSpec spec = cfg_.data.mask;
  if (!cfg_.data.fixed_masks) {
    spec.seed = derive_seed(cfg_.seed ^ kMaskStream, static_cast<uint64_t>(state.global_step));
    return generate_masks(spec, static_cast<int64_t>(batch.indices.size()), res, res);
  }
  std::vector<torch::Tensor> masks;
  for (auto idx : batch.indices) {
    spec.seed = derive_seed(cfg_.seed ^ kFixedMaskStream, static_cast<uint64_t>(idx));
    masks.push_back(generate_mask(spec, res, res).data());
  }
  return MaskBatch(torch::cat(masks));
}

MaskBatch Trainer::eval_masks(int64_t count) const {
  MaskSpec spec = cfg_.data.mask;
  spec.seed = cfg_.eval.mask_seed;
  return generate_masks(spec, count, cfg_.data.resolution, cfg_.data.resolution);
}

StepReport Trainer::train_step(TrainState& s, const Batch& batch, const MaskBatch& masks, int64_t batch_idx) {
  StepReport rep;
  rep.epoch = s.epoch;
  rep.batch_idx = batch_idx;
  rep.step = s.global_step;
  LossWeights weights = cfg_.schedule.weights_at(s.epoch);
  const auto step_seed = static_cast<uint64_t>(s.global_step);

  s.generator->train();
  s.critics->eval();
  set_requires_grad(*s.critics, false);

  const ImageBatch& images = batch.images;
  GeneratorOutput out;
  ImageBatch comp;
  {
    AutocastScope autocast(cfg_.train.mixed_precision);
    out = s.generator->forward(make_masked_input(images, masks), cfg_.generator.noise.sigma,
                               make_generator(derive_seed(cfg_.seed ^ kNoiseStream, step_seed)));
    comp = composite(images, ImageBatch(out.prediction.data().to(images.data().scalar_type())), masks);

    LossTerms terms;
    terms.rec = rec_loss(out.prediction, images, masks);
    const auto sgt = pseudo_semantic_labels(images, cfg_.semantic.provider, cfg_.generator.num_classes,
                                            batch.labels, cfg_.semantic.fallback_to_cluster);
    if (sgt) {
      terms.sem = sem_loss(out.semantic, *sgt, masks);
    } else {
      weights.w_sem = 0.0;
    }
    terms.perc = perc_loss(out.prediction, images, *perceptual_, weights.level_weights);
    terms.ctx = ctx_loss(comp, images, boundary_mask(masks, boundary_radius_));
    terms.adv = adv_g_loss(s.critics->score(comp, out.semantic));
    rep.loss = total_g_loss(terms, weights);
  }

  s.g_opt->zero_grad();
  rep.loss.total_tensor.backward();
  const auto params = s.generator->parameters();
  rep.grad_norm = torch::nn::utils::clip_grad_norm_(params, cfg_.train.clip_norm);
  if (!std::isfinite(rep.grad_norm)) throw NonFiniteLossError("generator gradient");
  rep.clipped_norm = grad_norm(params);
  s.g_opt->step();
  set_requires_grad(*s.critics, true);

  if (!critics_frozen_ && cfg_.schedule.critic_update_due(s.epoch, batch_idx)) {
    s.critics->train();
    const double lambda = weights.w_gp;
    auto real = images.data();
    auto fake = comp.data().detach();
    auto layout = out.semantic.data().detach();
    auto gen = make_generator(derive_seed(cfg_.seed ^ kPenaltyStream, step_seed));
    CriticFn d_global = [&](const torch::Tensor& x) { return s.critics->global->forward(x); };
    CriticFn d_local = [&](const torch::Tensor& x) { return s.critics->local->forward(x).flatten(1).mean(1); };
    CriticFn d_sem = [&](const torch::Tensor& x) { return s.critics->semantic->forward(x, layout); };
    torch::Tensor loss;
    for (const CriticFn* d : {&d_global, &d_local, &d_sem}) {
      auto term = wasserstein_critic_loss((*d)(real), (*d)(fake)) + gradient_penalty(*d, real, fake, gen, lambda);
      loss = loss.defined() ? loss + term : term;
    }
    rep.critic_loss = loss.item<double>();
    if (!std::isfinite(rep.critic_loss)) throw NonFiniteLossError("critic");
    s.dg_opt->zero_grad();
    s.dl_opt->zero_grad();
    s.ds_opt->zero_grad();
    loss.backward();
    s.dg_opt->step();
    s.dl_opt->step();
    s.ds_opt->step();
    s.critics->eval();
    rep.critic_updated = true;
  }
  ++s.global_step;
  return rep;
}

MetricReport Trainer::validate(TrainState& state, const Dataset& val) const {
  GeneratorInpainter model(state.generator, cfg_.eval.sigma);
  auto r = evaluate(model, val, eval_masks(val.size()), make_eval_extractors(cfg_.eval), cfg_.eval.batch_size,
                    cfg_.eval.mask_seed);
  r.label = to_string(cfg_.generator.encoder.mode);
  return r;
}

FitResult Trainer::fit(TrainState& state, const Dataset& train, const Dataset* val, const FitOptions& options) {
  FitResult result;
  if (train.size() == 0) throw Error("fit: training set is empty");
  const bool files = !options.run_dir.empty();
  std::ofstream csv;
  if (files) {
    fs::create_directories(options.run_dir);
    const fs::path csv_path = options.run_dir / "metrics.csv";
    const bool fresh = !fs::exists(csv_path);
    csv.open(csv_path, std::ios::app);
    if (fresh) csv << csv_header();
  }
  auto checkpoint = [&](const std::string& name) {
    if (files) save_with_retry(options.run_dir / name, state);
  };

  while (state.epoch <= cfg_.train.epochs) {
    const int epoch = state.epoch;
    const auto batches =
        train.batches(cfg_.train.batch_size, derive_seed(cfg_.seed ^ kShuffleStream, static_cast<uint64_t>(epoch)));
    for (auto b = state.batch_in_epoch; b < static_cast<int64_t>(batches.size()); ++b) {
      if (cfg_.train.max_steps > 0 && state.global_step >= cfg_.train.max_steps) {
        result.hit_step_limit = true;
        checkpoint("last.ckpt");
        return result;
      }
      const Batch& batch = batches[static_cast<size_t>(b)];
      StepReport rep;
      try {
        rep = train_step(state, batch, train_masks(batch, state), b);
      } catch (const NonFiniteLossError& e) {
        log::error("step ", state.global_step, ": ", e.what(), "; keeping last finite state");
        checkpoint("last_finite.ckpt");
        throw;
      }
      state.batch_in_epoch = b + 1;
      ++result.steps;
      if (files) csv << csv_row(rep, cfg_.schedule.phase(epoch));
      if (options.on_step) options.on_step(rep);
    }
    ++state.epoch;
    state.batch_in_epoch = 0;

    if (val != nullptr && epoch % cfg_.train.val_every == 0) {
      ValRecord v{epoch, state.global_step, validate(state, *val)};
      log::info("epoch ", epoch, " val psnr ", v.report.psnr, " ssim ", v.report.ssim, " l1 ", v.report.l1);
      if (files) csv << csv_val_row(v);
      result.validations.push_back(v);
      if (v.report.psnr > state.best_val_psnr) {
        state.best_val_psnr = v.report.psnr;
        state.best_epoch = epoch;
        checkpoint("best.ckpt");
      }
    }
    if (epoch % cfg_.train.checkpoint_every == 0 || epoch == cfg_.train.epochs) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      checkpoint(name);
      checkpoint("last.ckpt");
    }
    if (files) csv.flush();
  }
  return result;
}

Container Trainer::to_container(const TrainState& s) const {
  Container c;
  c.kind = ContainerKind::Training;
  c.meta["epoch"] = s.epoch;
  c.meta["batch_in_epoch"] = s.batch_in_epoch;
  c.meta["global_step"] = s.global_step;
  c.meta["best_val_psnr"] = std::isfinite(s.best_val_psnr) ? nlohmann::json(s.best_val_psnr) : nlohmann::json();
  c.meta["best_epoch"] = s.best_epoch;
  c.meta["encoder_mode"] = to_string(cfg_.generator.encoder.mode);
  c.meta["config"] = dump_config(cfg_);
  c.meta["model_id"] = model_id(s.generator);
  append_module(c.blocks, "generator", *s.generator);
  append_module(c.blocks, "critics", *s.critics);
  append_adam(c.blocks, "optim.g", *s.g_opt, *s.generator);
  append_adam(c.blocks, "optim.dg", *s.dg_opt, *s.critics->global);
  append_adam(c.blocks, "optim.dl", *s.dl_opt, *s.critics->local);
  append_adam(c.blocks, "optim.ds", *s.ds_opt, *s.critics->semantic);
  return c;
}

void Trainer::restore(TrainState& s, const Container& c) const {
  if (c.kind != ContainerKind::Training) throw CheckpointError("not a training checkpoint (export bundles cannot resume)");
  restore_module(c, "generator", *s.generator);
  restore_module(c, "critics", *s.critics);
  restore_adam(c, "optim.g", *s.g_opt, *s.generator);
  restore_adam(c, "optim.dg", *s.dg_opt, *s.critics->global);
  restore_adam(c, "optim.dl", *s.dl_opt, *s.critics->local);
  restore_adam(c, "optim.ds", *s.ds_opt, *s.critics->semantic);
  s.epoch = c.meta.at("epoch").get<int>();
  s.batch_in_epoch = c.meta.at("batch_in_epoch").get<int64_t>();
  s.global_step = c.meta.at("global_step").get<int64_t>();
  const auto& best = c.meta.at("best_val_psnr");
  s.best_val_psnr = best.is_null() ? -std::numeric_limits<double>::infinity() : best.get<double>();
  s.best_epoch = c.meta.at("best_epoch").get<int>();
}

void Trainer::save(const fs::path& path, const TrainState& state) const {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  write_container(path, to_container(state), {{"saved_at", stamp}});
}

void Trainer::save_with_retry(const fs::path& path, const TrainState& state) const {
  constexpr int kAttempts = 3;
  for (int attempt = 1;; ++attempt) {
    try {
      save(path, state);
      return;
    } catch (const std::exception& e) {
      if (attempt == kAttempts) {
        throw CheckpointError("giving up on " + path.string() + " after " + std::to_string(kAttempts) +
                              " attempts: " + e.what());
      }
      log::warn("checkpoint write failed (", e.what(), "), retrying");
      std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    }
  }
}

TrainState Trainer::load(const fs::path& path) const {
  TrainState s = init_state();
  restore(s, read_container(path));
  return s;
}

Dataset load_split(const RunConfig& cfg, Split split) {
  DatasetOptions o;
  o.root = cfg.resolve(cfg.data.root);
  o.split = split;
  o.resolution = cfg.data.resolution;
  o.load_labels = cfg.semantic.provider == SemanticProvider::ExternalParser;
  return Dataset::load(o);
}

double hole_l1(InpaintGenerator& generator, const Dataset& data, const MaskBatch& masks, double sigma,
               uint64_t seed) {
  torch::NoGradGuard no_grad;
  double abs_sum = 0, count = 0;
  const auto batches = data.batches(16);
  for (size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    const MaskBatch m(masks.data().index_select(0, torch::tensor(batch.indices, torch::kLong)));
    auto out = generator->forward(make_masked_input(batch.images, m), sigma, make_generator(derive_seed(seed, b)));
    auto diff = (out.prediction.data() - batch.images.data()).abs() * m.data();
    abs_sum += diff.sum().item<double>();
    count += m.data().sum().item<double>() * 3.0;
  }
  return count > 0 ? abs_sum / count : 0.0;
}

RunConfig checkpoint_config(const Container& c) {
  if (!c.meta.contains("config")) throw CheckpointError("checkpoint carries no config snapshot");
  return parse_config(c.meta.at("config").get<std::string>());
}

Container export_bundle(const Container& training_checkpoint) {
  Container out;
  out.kind = ContainerKind::Inference;
  for (const char* key : {"config", "model_id", "epoch", "global_step", "encoder_mode"}) {
    if (training_checkpoint.meta.contains(key)) out.meta[key] = training_checkpoint.meta.at(key);
  }
  for (const auto& b : training_checkpoint.blocks) {
    if (b.name.rfind("generator.", 0) == 0) out.blocks.push_back(b);
  }
  if (out.blocks.empty()) throw CheckpointError("checkpoint holds no generator weights");
  return out;
}

LoadedModel load_model(const fs::path& path) {
  const Container c = read_container(path);
  LoadedModel m;
  m.config = checkpoint_config(c);
  m.generator = InpaintGenerator(m.config.generator);
  restore_module(c, "generator", *m.generator);
  m.generator->eval();
  m.model_id = model_id(m.generator);
  return m;
}

std::string model_id(const InpaintGenerator& generator) { return module_hash(*generator).substr(0, 16); }

}  // namespace semfill
