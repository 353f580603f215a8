#include <gtest/gtest.h>

#include <fstream>

#include "semfill/feature_extractor.hpp"
#include "support.hpp"

namespace semfill {
namespace {

namespace fs = std::filesystem;

void save_state(const fs::path& path, const torch::nn::Module& m, const std::string& skip = "") {
  c10::Dict<std::string, torch::Tensor> state;
  for (const auto& item : m.named_parameters()) {
    if (item.key() != skip) state.insert(item.key(), item.value().detach());
  }
  state.insert("classifier.0.weight", torch::zeros({2, 2}));  // ignored
  const auto bytes = torch::pickle_save(state);
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(Vgg19, LoadsSavedStateDict) {
  auto dir = testing::temp_dir("vgg");
  torch::manual_seed(3);
  Vgg19Trunk reference;
  reference->eval();
  save_state(dir / "vgg.pt", *reference);
  torch::manual_seed(4);
  Vgg19Extractor loaded(dir / "vgg.pt");
  auto x = testing::random_image(1, 32, 5).data();
  auto want = reference->forward(x);
  auto got = loaded.extract(x);
  ASSERT_EQ(got.size(), 4u);
  for (size_t l = 0; l < got.size(); ++l) EXPECT_TRUE(torch::equal(got[l], want[l])) << "level " << l;
  EXPECT_EQ(got[0].size(1), 64);
  EXPECT_EQ(got[3].size(1), 512);
  EXPECT_EQ(got[3].size(2), 4);
}

TEST(Vgg19, MissingOrForeignFilesAreErrors) {
  auto dir = testing::temp_dir("vgg_bad");
  Vgg19Trunk reference;
  save_state(dir / "partial.pt", *reference, "features.0.weight");
  EXPECT_THROW(Vgg19Extractor(dir / "partial.pt"), Error);
  std::ofstream(dir / "junk.pt") << "not a state dict";
  EXPECT_THROW(Vgg19Extractor(dir / "junk.pt"), Error);
  EXPECT_THROW(Vgg19Extractor(dir / "absent.pt"), Error);
}

TEST(PerceptualFactory, StubOnlyWhenAllowed) {
  EXPECT_EQ(make_perceptual_extractor("identity", {}, false)->name(), "identity");
  EXPECT_THROW(make_perceptual_extractor("vgg19", "/nonexistent/vgg.pt", false), Error);
  EXPECT_EQ(make_perceptual_extractor("vgg19", "/nonexistent/vgg.pt", true)->name(), "identity");
  EXPECT_THROW(make_perceptual_extractor("resnet", {}, true), Error);
}

}  // namespace
}  // namespace semfill
