#include "semfill/metrics.hpp"

#include <cmath>

#include "semfill/log.hpp"

namespace semfill {

namespace {

torch::Tensor unit_range(const ImageBatch& x) { return (x.data().to(torch::kFloat64) + 1.0) / 2.0; }

void check_pair(const ImageBatch& a, const ImageBatch& b, const char* what) {
  if (a.data().sizes() != b.data().sizes()) throw ShapeError(std::string(what) + ": shape mismatch");
}

torch::Tensor gaussian_window(int64_t size, double sigma) {
  auto x = torch::arange(size, torch::kFloat64) - static_cast<double>(size - 1) / 2.0;
  auto g = torch::exp(-(x * x) / (2 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g);
}

}  // namespace

double psnr(const ImageBatch& a, const ImageBatch& b) {
  check_pair(a, b, "psnr");
  const auto diff = unit_range(a) - unit_range(b);
  const auto mse = (diff * diff).flatten(1).mean(1);
  double total = 0;
  for (int64_t i = 0; i < mse.size(0); ++i) {
    const double m = mse[i].item<double>();
    total += m <= 0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
  }
  return total / static_cast<double>(mse.size(0));
}

double ssim(const ImageBatch& a, const ImageBatch& b) {
  check_pair(a, b, "ssim");
  constexpr int64_t kWin = 11;
  if (a.height() < kWin || a.width() < kWin) throw ShapeError("ssim: image smaller than the 11×11 window");
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const int64_t channels = a.data().size(1);
  auto x = unit_range(a);
  auto y = unit_range(b);
  auto w = gaussian_window(kWin, 1.5).view({1, 1, kWin, kWin}).repeat({channels, 1, 1, 1});
  auto filt = [&](const torch::Tensor& t) {
    return torch::nn::functional::conv2d(t, w, torch::nn::functional::Conv2dFuncOptions().groups(channels));
  };
  auto mu_x = filt(x);
  auto mu_y = filt(y);
  auto sxx = filt(x * x) - mu_x * mu_x;
  auto syy = filt(y * y) - mu_y * mu_y;
  auto sxy = filt(x * y) - mu_x * mu_y;
  auto ssim_map = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) /
             ((mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2));
  return ssim_map.mean().item<double>();
}

double l1_metric(const ImageBatch& a, const ImageBatch& b) {
  check_pair(a, b, "l1");
  return (a.data().to(torch::kFloat64) - b.data().to(torch::kFloat64)).abs().mean().item<double>();
}

torch::Tensor psd_sqrt(const torch::Tensor& m) {
  auto sym = (m.to(torch::kFloat64) + m.to(torch::kFloat64).transpose(0, 1)) / 2.0;
  auto [evals, evecs] = torch::linalg_eigh(sym);
  auto root = evecs.matmul(torch::diag(evals.clamp_min(0).sqrt())).matmul(evecs.transpose(0, 1));
  return (root + root.transpose(0, 1)) / 2.0;
}

double fid_from_moments(const torch::Tensor& mu1, const torch::Tensor& cov1, const torch::Tensor& mu2,
                        const torch::Tensor& cov2) {
  auto s1 = cov1.to(torch::kFloat64);
  auto s2 = cov2.to(torch::kFloat64);
  if (!torch::isfinite(s1).all().item<bool>() || !torch::isfinite(s2).all().item<bool>()) {
    throw Error("fid: non-finite covariance");
  }
  const auto diff = mu1.to(torch::kFloat64) - mu2.to(torch::kFloat64);
  // tr((Σ1 Σ2)^½) = tr((Σ1^½ Σ2 Σ1^½)^½), and the inner product is PSD.
  const auto r1 = psd_sqrt(s1);
  const auto cross = psd_sqrt(r1.matmul(s2).matmul(r1));
  const double value = diff.dot(diff).item<double>() +
                       (s1.trace() + s2.trace() - 2.0 * cross.trace()).item<double>();
  return std::max(0.0, value);
}

double fid(const torch::Tensor& real_features, const torch::Tensor& fake_features) {
  auto moments = [](const torch::Tensor& f) {
    auto x = f.to(torch::kFloat64);
    if (x.dim() != 2 || x.size(0) < 2) throw ShapeError("fid: expected an N×D feature matrix with N >= 2");
    if (x.size(0) < x.size(1)) {
      log::warn("fid: ", x.size(0), " samples for ", x.size(1), "-dim features; covariance is rank deficient");
    }
    auto mu = x.mean(0);
    auto c = x - mu;
    return std::pair{mu, c.transpose(0, 1).matmul(c) / static_cast<double>(x.size(0) - 1)};
  };
  if (real_features.size(-1) != fake_features.size(-1)) throw ShapeError("fid: feature widths differ");
  auto [mu1, s1] = moments(real_features);
  auto [mu2, s2] = moments(fake_features);
  return fid_from_moments(mu1, s1, mu2, s2);
}

}  // namespace semfill
