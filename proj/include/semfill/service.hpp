#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semfill/config.hpp"
#include "semfill/generator.hpp"

namespace semfill {

/// A rejected request and the HTTP status it maps to.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

inline constexpr int kMaxSamples = 4;

struct InpaintRequest {
  std::vector<uint8_t> image;  // encoded PNG or JPEG
  std::vector<uint8_t> mask;   // single-channel PNG, 255 = missing
  double sigma = 0.0;
  std::optional<uint64_t> seed;
  int n_samples = 1;
};

struct InpaintResult {
  std::vector<std::vector<uint8_t>> images;  // composite PNGs
  std::vector<uint64_t> seeds;               // seed used for each result
  std::string model_id;
  double timing_ms = 0;
  bool resized = false;  // inputs were resampled to the model resolution
  int64_t resolution = 0;
  double occlusion_ratio = 0;
};

/// HTTP inference front end.
///   POST /v1/inpaint  multipart: image, mask (files), meta (JSON with
///                     sigma, seed, n_samples) -> JSON with base64 PNGs
///   GET  /v1/health   200 {"status":"ok","model_id":...} or 503
/// Status codes: 400 malformed input, 413 body too large, 422 out-of-range
/// sigma or n_samples, 429 queue full, 503 no model loaded.
class InpaintService {
 public:
  explicit InpaintService(ServiceConfig cfg);
  ~InpaintService();
  InpaintService(const InpaintService&) = delete;
  InpaintService& operator=(const InpaintService&) = delete;

  /// Loads an export bundle (or a training checkpoint's generator).
  void load(const std::filesystem::path& bundle);
  void set_model(InpaintGenerator generator, std::string model_id);
  bool ready() const;
  std::string model_id() const;

  /// Validates and runs one request without HTTP. Throws RequestError.
  InpaintResult run(const InpaintRequest& request) const;

  /// Starts listening on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(int port);
  /// Blocks until stop() is called from another thread or a signal.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses the multipart-independent parts of a request: the meta JSON.
void apply_request_meta(InpaintRequest& request, const std::string& meta_json);

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace semfill
