#include <cmath>

#include "semfill/discriminators.hpp"

namespace semfill {
namespace {

torch::Tensor l2_normalize(const torch::Tensor& x) { return x / (x.norm() + 1e-12); }

void init_weight_and_bias(torch::Tensor& w, torch::Tensor& b, int64_t fan_in) {
  torch::NoGradGuard guard;
  torch::nn::init::kaiming_uniform_(w, std::sqrt(5.0));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  b.uniform_(-bound, bound);
}

// One power-iteration step on a 2-D matrix view; updates u and v in place.
void power_iterate(const torch::Tensor& mat, torch::Tensor& u, torch::Tensor& v) {
  torch::NoGradGuard guard;
  v.copy_(l2_normalize(torch::mv(mat.t(), u)));
  u.copy_(l2_normalize(torch::mv(mat, v)));
}

void converge_uv(const torch::Tensor& mat, torch::Tensor& u, torch::Tensor& v, int max_iterations,
                 double tolerance) {
  torch::NoGradGuard guard;
  double prev = 0.0;
  for (int i = 0; i < max_iterations; ++i) {
    power_iterate(mat, u, v);
    const double sigma = torch::dot(u, torch::mv(mat, v)).item<double>();
    if (i > 0 && std::abs(sigma - prev) <= tolerance * std::max(1.0, std::abs(sigma))) break;
    prev = sigma;
  }
}

}  // namespace

SpectralConv2dImpl::SpectralConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel,
                                       int64_t stride, int64_t padding)
    : stride_(stride), padding_(padding) {
  weight_ = register_parameter("weight", torch::empty({out_channels, in_channels, kernel, kernel}));
  bias_ = register_parameter("bias", torch::empty({out_channels}));
  init_weight_and_bias(weight_, bias_, in_channels * kernel * kernel);
  u_ = register_buffer("u", l2_normalize(torch::randn({out_channels})));
  v_ = register_buffer("v", l2_normalize(torch::randn({in_channels * kernel * kernel})));
  converge();
}

void SpectralConv2dImpl::power_step() { power_iterate(weight_.detach().flatten(1), u_, v_); }

void SpectralConv2dImpl::converge(int max_iterations, double tolerance) {
  converge_uv(weight_.detach().flatten(1), u_, v_, max_iterations, tolerance);
}

torch::Tensor SpectralConv2dImpl::normalized_weight() const {
  auto mat = weight_.flatten(1);
  // clones: power steps overwrite u and v in place
  auto sigma = torch::dot(u_.clone(), torch::mv(mat, v_.clone()));
  return weight_ / sigma;
}

torch::Tensor SpectralConv2dImpl::forward(const torch::Tensor& x) {
  if (is_training()) power_step();
  return torch::conv2d(x, normalized_weight(), bias_, {stride_, stride_}, {padding_, padding_});
}

SpectralLinearImpl::SpectralLinearImpl(int64_t in_features, int64_t out_features) {
  weight_ = register_parameter("weight", torch::empty({out_features, in_features}));
  bias_ = register_parameter("bias", torch::empty({out_features}));
  init_weight_and_bias(weight_, bias_, in_features);
  u_ = register_buffer("u", l2_normalize(torch::randn({out_features})));
  v_ = register_buffer("v", l2_normalize(torch::randn({in_features})));
  converge();
}

void SpectralLinearImpl::power_step() { power_iterate(weight_.detach(), u_, v_); }

void SpectralLinearImpl::converge(int max_iterations, double tolerance) {
  converge_uv(weight_.detach(), u_, v_, max_iterations, tolerance);
}

torch::Tensor SpectralLinearImpl::normalized_weight() const {
  return weight_ / torch::dot(u_.clone(), torch::mv(weight_, v_.clone()));
}

torch::Tensor SpectralLinearImpl::forward(const torch::Tensor& x) {
  if (is_training()) power_step();
  return torch::linear(x, normalized_weight(), bias_);
}

}  // namespace semfill
