#include <gtest/gtest.h>

#include <fstream>

#include "semfill/core_data.hpp"
#include "semfill/dataset.hpp"
#include "semfill/image_io.hpp"
#include "support.hpp"

namespace semfill {
namespace {

using testing::bit_equal;
using testing::random_image;
using testing::square_hole;

// Brute-force band: p is in the band iff some pixel within Chebyshev
// distance r is missing and some pixel within r is known.
torch::Tensor brute_force_band(const torch::Tensor& mask2d, int r) {
  const int64_t h = mask2d.size(0), w = mask2d.size(1);
  auto acc = mask2d.accessor<float, 2>();
  auto out = torch::zeros({h, w});
  auto o = out.accessor<float, 2>();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      bool near_hole = false, near_known = false;
      for (int64_t dy = -r; dy <= r; ++dy) {
        for (int64_t dx = -r; dx <= r; ++dx) {
          const int64_t yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          (acc[yy][xx] > 0.5f ? near_hole : near_known) = true;
        }
      }
      o[y][x] = near_hole && near_known ? 1.0f : 0.0f;
    }
  }
  return out;
}

TEST(MakeMaskedInput, ZeroMaskIsIdentity) {
  auto img = random_image(2, 8, 1);
  auto out = make_masked_input(img, MaskBatch(torch::zeros({2, 1, 8, 8})));
  EXPECT_TRUE(bit_equal(out.image.data(), img.data()));
}

TEST(MakeMaskedInput, FullMaskZeroesEverything) {
  auto img = random_image(2, 8, 2);
  auto out = make_masked_input(img, MaskBatch(torch::ones({2, 1, 8, 8})));
  EXPECT_EQ(out.image.data().abs().max().item<float>(), 0.0f);
}

TEST(MakeMaskedInput, TwoByTwoExample) {
  auto img = torch::tensor({1.0f, -1.0f, 0.5f, 0.0f}).view({1, 1, 2, 2}).expand({1, 3, 2, 2}).contiguous();
  auto mask = torch::tensor({0.0f, 1.0f, 0.0f, 0.0f}).view({1, 1, 2, 2});
  auto out = make_masked_input(ImageBatch(img), MaskBatch(mask)).image.data();
  auto expected = torch::tensor({1.0f, 0.0f, 0.5f, 0.0f}).view({1, 1, 2, 2}).expand({1, 3, 2, 2});
  EXPECT_TRUE(torch::equal(out, expected));
}

TEST(MakeMaskedInput, ShapeMismatchThrows) {
  EXPECT_THROW(make_masked_input(random_image(1, 8, 3), MaskBatch(torch::zeros({1, 1, 4, 4}))), ShapeError);
  EXPECT_THROW(make_masked_input(random_image(2, 8, 3), MaskBatch(torch::zeros({1, 1, 8, 8}))), ShapeError);
}

TEST(MaskBatch, RejectsNonBinaryAndBadShape) {
  EXPECT_THROW(MaskBatch(torch::full({1, 1, 4, 4}, 0.5)), Error);
  EXPECT_THROW(MaskBatch(torch::zeros({1, 2, 4, 4})), ShapeError);
  EXPECT_THROW(ImageBatch(torch::zeros({1, 1, 4, 4})), ShapeError);
}

TEST(Composite, MaskExtremes) {
  auto img = random_image(2, 8, 4);
  auto pred = random_image(2, 8, 5);
  EXPECT_TRUE(bit_equal(composite(img, pred, MaskBatch(torch::zeros({2, 1, 8, 8}))).data(), img.data()));
  EXPECT_TRUE(bit_equal(composite(img, pred, MaskBatch(torch::ones({2, 1, 8, 8}))).data(), pred.data()));
}

TEST(Composite, PredictionEqualToImageIsIdempotent) {
  auto img = random_image(1, 16, 6);
  EXPECT_TRUE(bit_equal(composite(img, img, square_hole(1, 16, 3, 5, 7)).data(), img.data()));
}

TEST(Composite, KnownPixelsExactAndHoleFromPrediction) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto img = random_image(2, 16, seed);
    auto pred = random_image(2, 16, seed + 100);
    torch::manual_seed(seed + 200);
    auto mask = MaskBatch((torch::rand({2, 1, 16, 16}) > 0.6).to(torch::kFloat));
    auto out = composite(img, pred, mask).data();
    auto known = (mask.data() == 0).expand_as(out);
    EXPECT_TRUE(torch::equal(out.masked_select(known), img.data().masked_select(known)));
    EXPECT_TRUE(torch::equal(out.masked_select(~known), pred.data().masked_select(~known)));
  }
}

TEST(Composite, MaskedInputWithZeroPredictionRoundTrips) {
  auto img = random_image(1, 16, 8);
  auto mask = square_hole(1, 16, 2, 2, 6);
  auto masked = make_masked_input(img, mask);
  auto out = composite(img, ImageBatch(torch::zeros_like(img.data())), mask);
  EXPECT_TRUE(bit_equal(out.data(), masked.image.data()));
}

TEST(Composite, ShapeMismatchThrows) {
  EXPECT_THROW(composite(random_image(1, 8, 1), random_image(1, 16, 1), MaskBatch(torch::zeros({1, 1, 8, 8}))),
               ShapeError);
}

TEST(BoundaryMask, EmptyMaskHasNoBand) {
  auto band = boundary_mask(MaskBatch(torch::zeros({1, 1, 16, 16})), 3);
  EXPECT_EQ(band.data().sum().item<float>(), 0.0f);
}

TEST(BoundaryMask, CentredHoleRadiusOneIsInnerAndOuterRing) {
  auto mask = square_hole(1, 16, 6, 6, 4);
  auto band = boundary_mask(mask, 1).data()[0][0];
  // 12 inner-ring pixels of the 4×4 hole plus 20 pixels of the 6×6 ring outside it
  EXPECT_EQ(band.sum().item<float>(), 32.0f);
  EXPECT_TRUE(torch::equal(band, brute_force_band(mask.data()[0][0], 1)));
  EXPECT_EQ(band[7][7].item<float>(), 0.0f);  // hole interior
  EXPECT_EQ(band[5][5].item<float>(), 1.0f);  // outer ring corner
}

TEST(BoundaryMask, MatchesBruteForceOnRandomMasks) {
  for (int r : {1, 2, 3}) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      torch::manual_seed(seed);
      auto m = (torch::rand({1, 1, 20, 20}) > 0.7).to(torch::kFloat);
      auto band = boundary_mask(MaskBatch(m), r).data()[0][0];
      EXPECT_TRUE(torch::equal(band, brute_force_band(m[0][0].contiguous(), r))) << "r=" << r << " seed=" << seed;
    }
  }
}

TEST(BoundaryMask, MonotoneInRadius) {
  torch::manual_seed(3);
  auto m = MaskBatch((torch::rand({2, 1, 24, 24}) > 0.8).to(torch::kFloat));
  for (int r = 1; r < 5; ++r) {
    auto small = boundary_mask(m, r).data();
    auto large = boundary_mask(m, r + 1).data();
    EXPECT_TRUE((small <= large).all().item<bool>());
  }
}

TEST(BoundaryMask, RadiusMustBePositive) {
  EXPECT_THROW(boundary_mask(MaskBatch(torch::zeros({1, 1, 8, 8})), 0), Error);
}

TEST(BoundaryMask, DefaultRadiusScales) {
  EXPECT_EQ(default_boundary_radius(128), 3);
  EXPECT_EQ(default_boundary_radius(256), 6);
  EXPECT_EQ(default_boundary_radius(32), 1);
}

TEST(DownsampleMask, AnyMissingCellIsMissing) {
  auto m = torch::zeros({1, 1, 4, 4});
  m[0][0][1][1] = 1;
  auto d = downsample_mask(MaskBatch(m), 2).data()[0][0];
  EXPECT_EQ(d[0][0].item<float>(), 1.0f);
  EXPECT_EQ(d.sum().item<float>(), 1.0f);
  EXPECT_THROW(downsample_mask(MaskBatch(torch::zeros({1, 1, 6, 6})), 4), ShapeError);
}

TEST(ImageIo, NormalizeMapsWhiteToOneAndRoundTrips) {
  auto white = torch::full({1, 3, 4, 4}, 255, torch::kUInt8);
  EXPECT_TRUE(torch::equal(normalize_u8(white), torch::ones({1, 3, 4, 4})));
  auto all = torch::arange(256, torch::kInt).to(torch::kUInt8);
  auto back = denormalize_to_u8(normalize_u8(all));
  EXPECT_LE((back.to(torch::kInt) - all.to(torch::kInt)).abs().max().item<int>(), 1);
}

TEST(ImageIo, PngRoundTrip) {
  auto dir = testing::temp_dir("png");
  auto img = random_image(1, 16, 9);
  auto rgb = tensor_to_rgb(img.data());
  write_rgb_png(dir / "a.png", rgb);
  auto back = read_rgb(dir / "a.png");
  EXPECT_EQ(cv::norm(rgb, back, cv::NORM_INF), 0.0);

  auto mask = square_hole(1, 32, 4, 4, 9);
  write_mask_png(dir / "m.png", mask);
  EXPECT_TRUE(torch::equal(read_mask_png(dir / "m.png").data(), mask.data()));
  auto gray = mask_to_gray(mask);
  EXPECT_EQ(gray.at<uint8_t>(5, 5), 255);
  EXPECT_EQ(gray.at<uint8_t>(0, 0), 0);
}

TEST(ImageIo, CompositeRgbKeepsKnownBytes) {
  auto img = random_image(1, 16, 10);
  auto rgb = tensor_to_rgb(img.data());
  auto mask = square_hole(1, 16, 4, 4, 8);
  auto out = composite_rgb(rgb, torch::zeros({1, 3, 16, 16}), mask);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool hole = y >= 4 && y < 12 && x >= 4 && x < 12;
      if (!hole) {
        EXPECT_EQ(out.at<cv::Vec3b>(y, x), rgb.at<cv::Vec3b>(y, x));
      }
    }
  }
}

TEST(ImageIo, UnreadableFileThrows) {
  EXPECT_THROW(read_rgb("/nonexistent/image.png"), Error);
  EXPECT_THROW(decode_rgb({1, 2, 3}), Error);
}

TEST(Dataset, FiveImagesBatchSizeTwo) {
  auto dir = testing::temp_dir("ds5");
  std::filesystem::create_directories(dir / "train");
  for (int i = 0; i < 5; ++i) {
    write_rgb_png(dir / "train" / ("img" + std::to_string(i) + ".png"),
                  tensor_to_rgb(random_image(1, 8, static_cast<uint64_t>(i)).data()));
  }
  auto ds = Dataset::load({dir, Split::Train, 32, false});
  ASSERT_EQ(ds.size(), 5);
  auto batches = ds.batches(2);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].images.batch(), 2);
  EXPECT_EQ(batches[1].images.batch(), 2);
  EXPECT_EQ(batches[2].images.batch(), 1);
  EXPECT_EQ(batches[0].images.height(), 32);
  for (const auto& b : batches) EXPECT_TRUE(b.images.in_range());
}

TEST(Dataset, WhiteImageNormalizesToOne) {
  auto dir = testing::temp_dir("white");
  std::filesystem::create_directories(dir / "val");
  write_rgb_png(dir / "val" / "w.png", cv::Mat(16, 16, CV_8UC3, cv::Scalar(255, 255, 255)));
  auto ds = Dataset::load({dir, Split::Val, 32, false});
  EXPECT_TRUE(torch::equal(ds[0].image, torch::ones({3, 32, 32})));
}

TEST(Dataset, SkipsUnreadableAndRejectsEmpty) {
  auto dir = testing::temp_dir("bad");
  std::filesystem::create_directories(dir / "train");
  std::ofstream(dir / "train" / "broken.png") << "not an image";
  EXPECT_THROW(Dataset::load({dir, Split::Train, 32, false}), Error);
  write_rgb_png(dir / "train" / "ok.png", cv::Mat(16, 16, CV_8UC3, cv::Scalar(0, 0, 0)));
  EXPECT_EQ(Dataset::load({dir, Split::Train, 32, false}).size(), 1);
}

TEST(Dataset, ManifestAndLabels) {
  auto ds = Dataset::load({std::string(SEMFILL_DATA_DIR) + "/smoke", Split::Train, 32, true});
  ASSERT_EQ(ds.size(), 8);
  EXPECT_EQ(ds[0].name, "train/face_000.png");
  ASSERT_TRUE(ds[0].labels.defined());
  EXPECT_EQ(ds[0].labels.sizes(), (std::vector<int64_t>{32, 32}));
  auto b = ds.batches(3)[0];
  EXPECT_EQ(b.labels.sizes(), (std::vector<int64_t>{3, 32, 32}));
}

TEST(Dataset, ValOrderIsDeterministicAndShuffleIsSeeded) {
  auto root = std::string(SEMFILL_DATA_DIR) + "/smoke";
  auto a = Dataset::load({root, Split::Val, 32, false});
  auto b = Dataset::load({root, Split::Val, 32, false});
  for (int64_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].name, b[i].name);
  auto train = Dataset::load({root, Split::Train, 32, false});
  auto s1 = train.batches(8, 5)[0].indices;
  auto s2 = train.batches(8, 5)[0].indices;
  EXPECT_EQ(s1, s2);
  auto sorted = s1;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int64_t>{0, 1, 2, 3, 4, 5, 6, 7}));
}

}  // namespace
}  // namespace semfill
