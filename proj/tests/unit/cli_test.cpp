#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "semfill/image_io.hpp"
#include "support.hpp"

namespace semfill {
namespace {

namespace fs = std::filesystem;

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SEMFILL_CLI) + " --log-level warn " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmoke = std::string(SEMFILL_CONFIG_DIR) + "/smoke.yaml";
const std::string kTiny =
    " --data.resolution 32 --model.encoder.base_channels 8 --model.encoder.vit_dim 16"
    " --model.semantic_channels 8 --model.critic_channels 8 --model.attention.key_dim 8"
    " --model.attention.scales [1] --eval.fid none --eval.lpips none";

TEST(Cli, ExitCodes) {
  auto dir = testing::temp_dir("cli_codes");
  EXPECT_EQ(cli("", dir / "log"), 1);
  EXPECT_EQ(cli("infer --image x.png", dir / "log"), 1);
  EXPECT_EQ(cli("no-such-command", dir / "log"), 1);
  EXPECT_EQ(cli("--help", dir / "log"), 0);

  std::ofstream(dir / "bad.yaml") << "train:\n  epochs: 1\n  bogus: 2\n";
  EXPECT_EQ(cli("train -c " + (dir / "bad.yaml").string(), dir / "log"), 2);
  EXPECT_NE(slurp(dir / "log").find("line 3"), std::string::npos) << slurp(dir / "log");
  EXPECT_EQ(cli("train -c " + kSmoke + " --data.resolution 70", dir / "log"), 2);
  EXPECT_EQ(cli("export --checkpoint /nonexistent.ckpt --out " + (dir / "x").string(), dir / "log"), 3);
}

TEST(Cli, MaskGenWritesMasksInBand) {
  auto dir = testing::temp_dir("cli_masks");
  ASSERT_EQ(cli("mask-gen -c " + kSmoke + " --n 5 --size 64 --seed 3 --out-dir " + (dir / "m").string(),
                dir / "log"),
            0);
  for (int i = 0; i < 5; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%04d.png", i);
    auto m = read_mask_png(dir / "m" / name);
    EXPECT_EQ(m.height(), 64);
    const double r = m.ratio()[0].item<double>();
    EXPECT_GE(r, 0.2);
    EXPECT_LE(r, 0.4);
  }
  ASSERT_EQ(cli("mask-gen -c " + kSmoke + " --n 5 --size 64 --seed 3 --out-dir " + (dir / "again").string(),
                dir / "log"),
            0);
  EXPECT_EQ(slurp(dir / "m" / "mask_0004.png"), slurp(dir / "again" / "mask_0004.png"));
}

TEST(Cli, TrainExportInferEval) {
  auto dir = testing::temp_dir("cli_flow");
  const auto run = dir / "run";
  ASSERT_EQ(cli("train -c " + kSmoke + kTiny + " --train.max_steps 3 --train.run_dir " + run.string(), dir / "log"),
            0)
      << slurp(dir / "log");
  ASSERT_TRUE(fs::exists(run / "last.ckpt"));
  EXPECT_TRUE(fs::exists(run / "config.yaml"));
  EXPECT_TRUE(fs::exists(run / "run.json"));

  ASSERT_EQ(cli("export --checkpoint " + (run / "last.ckpt").string() + " --out " + (dir / "a.bundle").string(),
                dir / "log"),
            0);
  ASSERT_EQ(cli("export --checkpoint " + (run / "last.ckpt").string() + " --out " + (dir / "b.bundle").string(),
                dir / "log"),
            0);
  EXPECT_EQ(slurp(dir / "a.bundle"), slurp(dir / "b.bundle"));
  EXPECT_LT(fs::file_size(dir / "a.bundle"), fs::file_size(run / "last.ckpt"));

  const auto image = std::string(SEMFILL_DATA_DIR) + "/smoke/val/face_001.png";
  write_rgb_png(dir / "face.png", resize_rgb(read_rgb(image), 32));
  auto hole = testing::centre_hole(1, 32);
  write_mask_png(dir / "mask.png", hole);
  const std::string common = " --image " + (dir / "face.png").string() + " --mask " + (dir / "mask.png").string();
  ASSERT_EQ(cli("infer --checkpoint " + (dir / "a.bundle").string() + common + " --sigma 0 --n 3 --seed 1 --out-dir " +
                    (dir / "out").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  const auto first = slurp(dir / "out" / "result_00.png");
  EXPECT_EQ(slurp(dir / "out" / "result_01.png"), first);
  EXPECT_EQ(slurp(dir / "out" / "result_02.png"), first);

  auto in = read_rgb(dir / "face.png");
  auto out = read_rgb(dir / "out" / "result_00.png");
  auto gray = mask_to_gray(hole);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (gray.at<uint8_t>(y, x) == 0) {
        ASSERT_EQ(out.at<cv::Vec3b>(y, x), in.at<cv::Vec3b>(y, x));
      }
    }
  }

  // the training checkpoint and its export give the same composite
  ASSERT_EQ(cli("infer --checkpoint " + (run / "last.ckpt").string() + common + " --sigma 0 --seed 1 --out-dir " +
                    (dir / "out_ckpt").string(),
                dir / "log"),
            0);
  EXPECT_EQ(slurp(dir / "out_ckpt" / "result_00.png"), first);

  ASSERT_EQ(cli("eval --checkpoint " + (dir / "a.bundle").string() + " --split val --out " + (dir / "eval").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  EXPECT_NE(slurp(dir / "log").find("PSNR"), std::string::npos);
  auto report = slurp(dir / "eval" / "report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')), "config,psnr,ssim,l1,lpips,fid,n_samples");

  // resuming a finished run performs no further steps
  ASSERT_EQ(cli("train -c " + kSmoke + kTiny + " --train.max_steps 3 --train.run_dir " + run.string() +
                    " --resume " + (run / "last.ckpt").string(),
                dir / "log"),
            0);
  EXPECT_NE(slurp(dir / "log").find("trained 0 steps"), std::string::npos) << slurp(dir / "log");
}

TEST(Cli, ConfigDocListsKeys) {
  auto dir = testing::temp_dir("cli_doc");
  ASSERT_EQ(cli("config-doc --out " + (dir / "ref.md").string(), dir / "log"), 0);
  const auto doc = slurp(dir / "ref.md");
  EXPECT_NE(doc.find("`train.g_lr`"), std::string::npos);
  EXPECT_NE(doc.find("(published default)"), std::string::npos);
}

}  // namespace
}  // namespace semfill
