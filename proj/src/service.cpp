#include "semfill/service.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <semaphore>
#include <shared_mutex>
#include <thread>

#include "semfill/core_data.hpp"
#include "semfill/image_io.hpp"
#include "semfill/log.hpp"
#include "semfill/trainer.hpp"

namespace semfill {

std::string base64_encode(const std::vector<uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error("base64: length is not a multiple of 4");
  std::vector<uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error("base64: invalid input");
  size_t pad = 0;
  for (auto it = text.rbegin(); it != text.rend() && *it == '='; ++it) ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

void apply_request_meta(InpaintRequest& request, const std::string& meta_json) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw RequestError(400, std::string("meta is not valid JSON: ") + e.what());
  }
  if (!meta.is_object()) throw RequestError(400, "meta must be a JSON object");
  for (const auto& [key, value] : meta.items()) {
    if (key == "sigma") {
      if (!value.is_number()) throw RequestError(400, "sigma must be a number");
      request.sigma = value.get<double>();
    } else if (key == "seed") {
      if (value.is_null()) continue;
      if (!value.is_number_unsigned()) throw RequestError(400, "seed must be a non-negative integer");
      request.seed = value.get<uint64_t>();
    } else if (key == "n_samples") {
      if (!value.is_number_integer()) throw RequestError(400, "n_samples must be an integer");
      request.n_samples = value.get<int>();
    } else {
      throw RequestError(400, "unknown meta field '" + key + "'");
    }
  }
}

struct InpaintService::Impl {
  ServiceConfig cfg;
  mutable std::shared_mutex model_mutex;
  InpaintGenerator generator{nullptr};
  std::string model_id;

  httplib::Server server;
  std::thread listener;
  std::atomic<int> in_flight{0};
  std::counting_semaphore<1024> workers{1};

  explicit Impl(ServiceConfig c) : cfg(std::move(c)), workers(std::max(1, cfg.workers)) {}
};

InpaintService::InpaintService(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

InpaintService::~InpaintService() { stop(); }

void InpaintService::load(const std::filesystem::path& bundle) {
  LoadedModel m = load_model(bundle);
  set_model(m.generator, m.model_id);
}

void InpaintService::set_model(InpaintGenerator generator, std::string id) {
  generator->eval();
  std::unique_lock lock(impl_->model_mutex);
  impl_->generator = std::move(generator);
  impl_->model_id = std::move(id);
}

bool InpaintService::ready() const {
  std::shared_lock lock(impl_->model_mutex);
  return !impl_->generator.is_empty();
}

std::string InpaintService::model_id() const {
  std::shared_lock lock(impl_->model_mutex);
  return impl_->model_id;
}

InpaintResult InpaintService::run(const InpaintRequest& req) const {
  const auto t0 = std::chrono::steady_clock::now();
  std::shared_lock lock(impl_->model_mutex);
  if (impl_->generator.is_empty()) throw RequestError(503, "model not loaded");
  if (!std::isfinite(req.sigma) || req.sigma < 0) throw RequestError(422, "sigma must be >= 0");
  if (req.n_samples < 1 || req.n_samples > kMaxSamples) {
    throw RequestError(422, "n_samples must be in [1, " + std::to_string(kMaxSamples) + "]");
  }
  if (req.image.empty()) throw RequestError(400, "missing image");
  if (req.mask.empty()) throw RequestError(400, "missing mask");
  cv::Mat rgb;
  MaskBatch mask;
  try {
    rgb = decode_rgb(req.image);
  } catch (const Error& e) {
    throw RequestError(400, std::string("image: ") + e.what());
  }
  try {
    mask = decode_mask_png(req.mask);
  } catch (const Error& e) {
    throw RequestError(400, std::string("mask: ") + e.what());
  }
  if (mask.height() != rgb.rows || mask.width() != rgb.cols) {
    throw RequestError(400, "image and mask dimensions differ");
  }

  InpaintResult result;
  const int64_t res = impl_->generator->config().image_size();
  result.resolution = res;
  if (rgb.rows != res || rgb.cols != res) {
    rgb = resize_rgb(rgb, static_cast<int>(res));
    mask = resize_mask(mask, res);
    result.resized = true;
  }
  result.occlusion_ratio = mask.ratio()[0].item<double>();
  result.model_id = impl_->model_id;

  const ImageBatch image(rgb_to_tensor(rgb));
  const uint64_t base = req.seed ? *req.seed : std::random_device{}();
  torch::NoGradGuard no_grad;
  const auto input = make_masked_input(image, mask);
  for (int i = 0; i < req.n_samples; ++i) {
    const uint64_t seed = base + static_cast<uint64_t>(i);
    const auto out = impl_->generator->forward(input, req.sigma, make_generator(seed));
    result.images.push_back(encode_rgb_png(composite_rgb(rgb, out.prediction.data(), mask)));
    result.seeds.push_back(seed);
  }
  result.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}, {"status", status}});
}

}  // namespace

int InpaintService::start(int port) {
  Impl& im = *impl_;
  auto& server = im.server;
  const int pool = im.cfg.workers + im.cfg.queue_limit + 2;
  server.new_task_queue = [pool] { return new httplib::ThreadPool(static_cast<size_t>(pool)); };
  server.set_payload_max_length(im.cfg.max_payload_bytes);
  server.set_default_headers({{"Access-Control-Allow-Origin", im.cfg.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    if (ready()) {
      send_json(res, 200, {{"status", "ok"}, {"model_id", model_id()}});
    } else {
      send_json(res, 503, {{"status", "loading"}});
    }
  });

  server.Post("/v1/inpaint", [this](const httplib::Request& req, httplib::Response& res) {
    Impl& im = *impl_;
    struct Count {
      std::atomic<int>& n;
      ~Count() { --n; }
    } count{im.in_flight};
    if (++im.in_flight > im.cfg.workers + im.cfg.queue_limit) {
      send_error(res, 429, "too many requests in flight");
      return;
    }
    try {
      if (!ready()) throw RequestError(503, "model not loaded");
      if (!req.is_multipart_form_data()) throw RequestError(400, "expected multipart/form-data");
      InpaintRequest r;
      for (const char* part : {"image", "mask"}) {
        if (!req.has_file(part)) throw RequestError(400, std::string("missing part '") + part + "'");
      }
      const auto& image = req.get_file_value("image").content;
      const auto& mask = req.get_file_value("mask").content;
      r.image.assign(image.begin(), image.end());
      r.mask.assign(mask.begin(), mask.end());
      if (req.has_file("meta")) apply_request_meta(r, req.get_file_value("meta").content);

      im.workers.acquire();
      InpaintResult out;
      try {
        out = run(r);
      } catch (...) {
        im.workers.release();
        throw;
      }
      im.workers.release();

      nlohmann::json body;
      body["model_id"] = out.model_id;
      body["timing_ms"] = out.timing_ms;
      body["resized"] = out.resized;
      body["resolution"] = out.resolution;
      body["occlusion_ratio"] = out.occlusion_ratio;
      body["seeds"] = out.seeds;
      body["results"] = nlohmann::json::array();
      for (const auto& png : out.images) body["results"].push_back(base64_encode(png));
      send_json(res, 200, body);
    } catch (const RequestError& e) {
      send_error(res, e.status(), e.what());
    } catch (const std::exception& e) {
      log::error("inpaint request failed: ", e.what());
      send_error(res, 500, e.what());
    }
  });

  const int bound = port == 0 ? server.bind_to_any_port(im.cfg.host) : port;
  if (port != 0 && !server.bind_to_port(im.cfg.host, port)) {
    throw Error("cannot bind " + im.cfg.host + ":" + std::to_string(port));
  }
  if (bound < 0) throw Error("cannot bind " + im.cfg.host);
  im.listener = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  log::info("serving on ", im.cfg.host, ":", bound);
  return bound;
}

void InpaintService::wait() {
  if (impl_->listener.joinable()) impl_->listener.join();
}

void InpaintService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace semfill
