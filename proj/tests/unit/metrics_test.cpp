#include <gtest/gtest.h>

#include <cmath>

#include "semfill/evaluate.hpp"
#include "semfill/losses.hpp"
#include "semfill/mask_gen.hpp"
#include "semfill/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace semfill {
namespace {

using testing::naive_ssim;
using testing::random_image;

torch::Tensor checkerboard(int64_t size) {
  auto i = torch::arange(size).view({size, 1});
  auto j = torch::arange(size).view({1, size});
  return ((i + j) % 2).to(torch::kDouble).view({1, 1, size, size}).expand({1, 3, size, size}).contiguous();
}

TEST(Psnr, ClosedFormCases) {
  auto a = torch::zeros({2, 3, 8, 8}, torch::kDouble);
  // differences of 0.5 and 0.1 in [0, 1] are 1.0 and 0.2 in [-1, 1]
  EXPECT_NEAR(psnr(ImageBatch(a), ImageBatch(a + 1.0)), 10 * std::log10(4.0), 1e-9);
  EXPECT_NEAR(psnr(ImageBatch(a), ImageBatch(a + 1.0)), 6.0206, 1e-4);
  EXPECT_NEAR(psnr(ImageBatch(a), ImageBatch(a + 0.2)), 20.0, 1e-9);
  EXPECT_DOUBLE_EQ(psnr(ImageBatch(a), ImageBatch(a)), kPsnrCap);
}

TEST(Psnr, Symmetric) {
  auto a = random_image(2, 16, 1), b = random_image(2, 16, 2);
  EXPECT_NEAR(psnr(a, b), psnr(b, a), 1e-9);
}

TEST(Ssim, SelfSimilarityAndSymmetry) {
  auto a = random_image(2, 16, 3), b = random_image(2, 16, 4);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
  auto inv = ImageBatch(-a.data());  // 1 − x in [0, 1]
  EXPECT_LT(ssim(a, inv), 1.0);
  EXPECT_LE(ssim(a, b), 1.0);
}

TEST(Ssim, CheckerboardShiftMatchesNaiveReference) {
  auto cb = checkerboard(17);
  using torch::indexing::Slice;
  auto a01 = cb.index({Slice(), Slice(), Slice(0, 16), Slice(0, 16)}).contiguous();
  auto b01 = cb.index({Slice(), Slice(), Slice(0, 16), Slice(1, 17)}).contiguous();
  const double got = ssim(ImageBatch(a01 * 2 - 1), ImageBatch(b01 * 2 - 1));
  EXPECT_NEAR(got, naive_ssim(a01, b01), 1e-6);
}

TEST(Ssim, RandomImagesMatchNaiveReference) {
  auto a = random_image(1, 20, 5), b = random_image(1, 20, 6);
  EXPECT_NEAR(ssim(a, b), naive_ssim((a.data() + 1) / 2, (b.data() + 1) / 2), 1e-6);
}

TEST(Ssim, SmallerThanWindowThrows) {
  EXPECT_THROW(ssim(random_image(1, 8, 1), random_image(1, 8, 2)), ShapeError);
}

TEST(L1Metric, AgreesWithFullMaskReconstructionLoss) {
  auto a = random_image(2, 16, 7), b = random_image(2, 16, 8);
  const double rec = rec_loss(a, b, MaskBatch(torch::ones({2, 1, 16, 16}))).item<double>();
  EXPECT_NEAR(l1_metric(a, b), rec, 1e-6);
}

TEST(Fid, OneDimensionalClosedForm) {
  auto one = torch::ones({1, 1}, torch::kDouble);
  EXPECT_NEAR(fid_from_moments(torch::zeros({1}), one, torch::full({1}, 3.0), one), 9.0, 1e-4);
  // (μ1 − μ2)² + (σ1 − σ2)²
  EXPECT_NEAR(fid_from_moments(torch::zeros({1}), one, torch::full({1}, 3.0), one * 4.0), 10.0, 1e-9);
}

TEST(Fid, SampledOneDimensionalSets) {
  // ±1 with unbiased variance exactly 1 for an even count n: scale √((n−1)/n)
  const int64_t n = 100;
  const double s = std::sqrt((n - 1.0) / n);
  auto base = (torch::arange(n) % 2).to(torch::kDouble).mul(2).sub(1).mul(s).view({n, 1});
  EXPECT_NEAR(fid(base, base + 3.0), 9.0, 1e-4);
}

TEST(Fid, IdentityAndSymmetry) {
  torch::manual_seed(9);
  auto a = torch::randn({64, 8}, torch::kDouble);
  auto b = torch::randn({64, 8}, torch::kDouble) * 1.5 + 0.3;
  EXPECT_NEAR(fid(a, a), 0.0, 1e-6);
  EXPECT_NEAR(fid(a, b), fid(b, a), 1e-6);
  EXPECT_GT(fid(a, b), 0.0);
}

TEST(Fid, NonFiniteCovarianceThrows) {
  auto bad = torch::full({1, 1}, NAN, torch::kDouble);
  EXPECT_THROW(fid_from_moments(torch::zeros({1}), bad, torch::zeros({1}), bad), Error);
}

TEST(PsdSqrt, SymmetricSquareRoot) {
  for (uint64_t s = 0; s < 10; ++s) {
    torch::manual_seed(s);
    auto x = torch::randn({6, 6}, torch::kDouble);
    auto m = x.matmul(x.t());
    auto r = psd_sqrt(m);
    EXPECT_LE((r - r.t()).abs().max().item<double>(), 1e-8);
    EXPECT_LE((r.matmul(r) - m).abs().max().item<double>(), 1e-8 * std::max(1.0, m.abs().max().item<double>()));
  }
}

// Returns the ground truth it is given.
class TruthInpainter final : public Inpainter {
 public:
  ImageBatch inpaint(const ImageBatch& image, const MaskBatch&, uint64_t) override { return image; }
};

Dataset smoke_val(int size = 32) {
  return Dataset::load({std::string(SEMFILL_DATA_DIR) + "/smoke", Split::Val, size, false});
}

TEST(Evaluate, PerfectModelAndAbsentColumns) {
  auto val = smoke_val();
  TruthInpainter perfect;
  MaskSpec spec;
  auto masks = generate_masks(spec, val.size(), 32, 32);
  auto r = evaluate(perfect, val, masks, EvalExtractors{}, 3, 0);
  EXPECT_DOUBLE_EQ(r.psnr, 100.0);
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.l1, 0.0);
  EXPECT_EQ(r.n_samples, val.size());
  EXPECT_FALSE(r.lpips.has_value());
  EXPECT_FALSE(r.fid.has_value());
  r.label = "perfect";
  auto table = format_table({r});
  EXPECT_NE(table.find("PSNR"), std::string::npos);
  EXPECT_LT(table.find("PSNR"), table.find("SSIM"));
  EXPECT_LT(table.find("L1"), table.find("LPIPS"));
  EXPECT_LT(table.find("LPIPS"), table.find("FID"));
  EXPECT_NE(table.find(" -"), std::string::npos);
  auto csv = to_csv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "config,psnr,ssim,l1,lpips,fid,n_samples");
  EXPECT_TRUE(to_json(r)["lpips"].is_null());
}

TEST(Evaluate, StubExtractorsAndDeterminism) {
  auto val = smoke_val();
  EvalConfig ec;
  ec.fid = "stub";
  ec.lpips = "stub";
  auto ex = make_eval_extractors(ec);
  torch::manual_seed(3);
  InpaintGenerator g(testing::tiny_generator(32));
  g->eval();
  GeneratorInpainter model(g, 0.1);
  MaskSpec spec;
  auto masks = generate_masks(spec, val.size(), 32, 32);
  auto r1 = evaluate(model, val, masks, ex, 2, 42);
  auto r2 = evaluate(model, val, masks, ex, 2, 42);
  ASSERT_TRUE(r1.lpips && r1.fid);
  EXPECT_GT(*r1.lpips, 0.0);
  EXPECT_GE(*r1.fid, 0.0);
  EXPECT_EQ(r1.psnr, r2.psnr);
  EXPECT_EQ(r1.ssim, r2.ssim);
  EXPECT_EQ(*r1.fid, *r2.fid);
  EXPECT_LT(r1.psnr, 100.0);
  EXPECT_THROW(evaluate(model, val, generate_masks(spec, 1, 32, 32), ex, 2, 42), ShapeError);
}

}  // namespace
}  // namespace semfill
