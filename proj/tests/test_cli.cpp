#include "bml/nn/checkpoint.hpp"
#include "bml/pipeline.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace bml;
using bml::test::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + BMLCTL_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small enough for a few seconds end to end.
std::string small_config(const fs::path& out, int steps = 3) {
  return R"({
  "seed": 11,
  "out": ")" + out.string() + R"(",
  "phantom": {"counts": {"train": 4, "val": 2, "test": 10}, "image": {"size": 48}},
  "train": {"arch": {"encoder_channels": 4, "width": 8, "decoder_channels": 4, "blocks": 1},
            "steps": )" + std::to_string(steps) + R"(, "batch_size": 2, "learning_rate": 1e-3},
  "eval": {"resolutions": [48]}
})";
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

}  // namespace

// --- configuration ---------------------------------------------------------------

TEST(Config, DefaultsAndRoundTrip) {
  RunConfig c = parse_run_config(R"({"seed": 5, "eval": {"resolutions": [128, 192], "region": "full"}})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.eval.resolutions, (std::vector<Index>{128, 192}));
  EXPECT_EQ(c.eval.region, EvalRegion::kFull);
  EXPECT_EQ(c.counts.train_healthy, 200);
  EXPECT_EQ(c.train.options.learning_rate, 2e-4);
  EXPECT_EQ(c.detect.config.open_radius, 1.0);
  EXPECT_EQ(c.detect.config.close_radius, 2.0);
  EXPECT_EQ(c.model_resolutions(), c.eval.resolutions);
  c.detect.inpainter = InpainterKind::kClassical;
  c.train.arch.blocks = 2;
  c.phantom.size = 96;
  const std::string text = to_json_string(c);
  EXPECT_EQ(to_json_string(parse_run_config(text)), text);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "trian": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "train": {"stepz": 3}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": "x"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"detect": {"inpainter": "magic"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{}").validate(), ConfigError);  // no seed
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "eval": {"resolutions": []}})").validate(), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "detect": {"open_radius": -1}})").validate(), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ShippedConfigsValidate) {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(BML_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++seen;
    EXPECT_NO_THROW(load_run_config(e.path()).validate()) << e.path();
  }
  EXPECT_GE(seen, 1);
}

TEST(Config, SharedModelResolutions) {
  RunConfig c = parse_run_config(R"({"seed": 1, "train": {"shared_model": true}, "eval": {"resolutions": [128, 448]}})");
  EXPECT_EQ(c.model_resolutions(), (std::vector<Index>{128}));
}

// --- command line ----------------------------------------------------------------

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cliusage");
  const fs::path log = dir / "log.txt";
  EXPECT_EQ(run_cli("", log), 1);
  EXPECT_EQ(run_cli("frobnicate", log), 1);
  EXPECT_EQ(run_cli("phantom --out " + (dir / "x").string(), log), 1);  // no seed
  write_file(dir / "bad.json", R"({"seed": 1, "bogus": 2})");
  EXPECT_EQ(run_cli("phantom --config " + (dir / "bad.json").string(), log), 1);
  EXPECT_EQ(run_cli("eval --seed 1 --resolutions 128,abc --out " + (dir / "x").string(), log), 1);
  EXPECT_EQ(run_cli("phantom --help", log), 0);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  TempDir dir("cliruntime");
  const fs::path log = dir / "log.txt";
  EXPECT_EQ(run_cli("train --seed 1 --out " + (dir / "empty").string(), log), 2);  // no dataset
  EXPECT_NE(slurp(log).find("phantom"), std::string::npos);
}

class CliRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("clirun");
    write_file(*dir_ / "run.json", small_config(*dir_ / "run"));
  }
  static void TearDownTestSuite() { delete dir_; }
  static int cli(const std::string& cmd, const std::string& extra = "") {
    return run_cli(cmd + " --config " + (*dir_ / "run.json").string() + " " + extra, *dir_ / (cmd + ".log"));
  }
  static RunConfig config() { return load_run_config(*dir_ / "run.json"); }
  static TempDir* dir_;
};

TempDir* CliRun::dir_ = nullptr;

TEST_F(CliRun, EndToEnd) {
  const RunLayout layout{*dir_ / "run"};
  ASSERT_EQ(cli("phantom"), 0);
  EXPECT_TRUE(fs::exists(layout.manifest()));
  EXPECT_EQ(load_manifest(layout.manifest()).entries.size(), 16u);

  ASSERT_EQ(cli("train"), 0);
  EXPECT_TRUE(fs::exists(layout.checkpoint(48)));
  const std::string trace = slurp(layout.loss_trace(48));
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 1 + 3);
  EXPECT_EQ(trace.substr(0, 10), "step,loss\n");
  std::istringstream rows(trace);
  std::string line;
  std::getline(rows, line);
  for (int step = 0; std::getline(rows, line); ++step) EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(step));

  ASSERT_EQ(cli("detect", "--classical --trace --overlay"), 0);
  const Manifest manifest = load_manifest(layout.manifest());
  const auto entries = manifest.split("test");
  Index nonempty = 0;
  for (const auto* e : entries) {
    const BinaryMask m = load_mask(layout.detect(48) / (e->id + ".png"));
    nonempty += m.any();
    for (const char* stage : {"x", "recon", "x_he", "recon_he", "NZ", "OT", "MO", "MC"})
      EXPECT_TRUE(fs::exists(layout.detect(48) / "trace" / (e->id + "_" + stage + ".png"))) << stage;
    EXPECT_TRUE(fs::exists(layout.detect(48) / "overlay" / (e->id + ".png")));
  }
  EXPECT_GT(nonempty, 0);

  ASSERT_EQ(cli("eval"), 0);
  const std::string metrics = slurp(layout.eval() / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + 10 + 1);
  const std::string report = slurp(layout.eval() / "report.json");
  EXPECT_EQ(nlohmann::json::parse(report)[0]["size_groups"].size(), 5u);

  const auto before = tree(layout.eval());
  ASSERT_EQ(cli("eval"), 0);
  EXPECT_EQ(tree(layout.eval()), before);

  ASSERT_EQ(cli("report"), 0);
  EXPECT_NE(slurp(layout.report()).find("| 48 | 10 |"), std::string::npos);

  ASSERT_EQ(cli("eval", "--resolutions 64"), 2);  // nothing detected at 64 yet
}

TEST_F(CliRun, ZeroStepsCheckpointEqualsInitialization) {
  TempDir dir("clizero");
  write_file(dir / "z.json", small_config(dir / "z"));
  const auto run = [&](const std::string& cmd, const std::string& extra = "") {
    return run_cli(cmd + " --config " + (dir / "z.json").string() + " " + extra, dir / "log.txt");
  };
  ASSERT_EQ(run("phantom"), 0);
  ASSERT_EQ(run("train", "--steps 0"), 0);
  RunConfig c = load_run_config(dir / "z.json");
  const auto loaded = nn::load_checkpoint(RunLayout{c.out}.checkpoint(48));
  const nn::InpainterModel<float> init(c.train.arch, init_seed(c, 48));
  ASSERT_EQ(loaded.params().size(), init.params().size());
  for (std::size_t i = 0; i < init.params().size(); ++i)
    EXPECT_TRUE(loaded.params()[i]->value == init.params()[i]->value);
  EXPECT_EQ(slurp(RunLayout{c.out}.loss_trace(48)), "step,loss\n");
}

TEST_F(CliRun, ExplicitInputsAndOverlay) {
  TempDir dir("cliinput");
  const PhantomSample s = dataset_sample(PhantomConfig{}, "test", 4, default_size_classes(), {}, 3);
  save_image(s.image, dir / "slice.png");
  save_mask(s.bone_mask, dir / "bone.png");
  save_mask(s.bone_mask.topRows(100), dir / "short.png");
  const std::string common = "--seed 1 --out " + (dir / "o").string() + " ";
  EXPECT_EQ(run_cli("detect --classical --overlay " + common + "--image " + (dir / "slice.png").string() + " --bone " +
                        (dir / "bone.png").string(),
                    dir / "log.txt"),
            0);
  const fs::path mask = dir / "o" / "detect" / "128" / "slice.png";
  ASSERT_TRUE(fs::exists(mask));
  EXPECT_TRUE(load_mask(mask).any());
  EXPECT_TRUE(is_subset(load_mask(mask), s.bone_mask));
  // The overlay is RGB, so read back its header dimensions.
  const std::string png = slurp(dir / "o" / "detect" / "128" / "overlay" / "slice.png");
  ASSERT_GT(png.size(), 26u);
  auto be32 = [&](std::size_t at) {
    return (std::uint32_t(std::uint8_t(png[at])) << 24) | (std::uint32_t(std::uint8_t(png[at + 1])) << 16) |
           (std::uint32_t(std::uint8_t(png[at + 2])) << 8) | std::uint32_t(std::uint8_t(png[at + 3]));
  };
  EXPECT_EQ(be32(16), 128u);
  EXPECT_EQ(be32(20), 128u);
  EXPECT_EQ(png[25], 2);  // colour type RGB

  EXPECT_EQ(run_cli("detect --classical " + common + "--image " + (dir / "slice.png").string() + " --bone " +
                        (dir / "short.png").string(),
                    dir / "log.txt"),
            2);
  EXPECT_EQ(run_cli("detect " + common + "--image " + (dir / "slice.png").string() + " --bone " +
                        (dir / "bone.png").string(),
                    dir / "log.txt"),
            2);  // no trained model
  EXPECT_NE(slurp(dir / "log.txt").find("missing model"), std::string::npos);
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir dir("clidet");
  for (const char* name : {"a", "b"}) {
    write_file(dir / (std::string(name) + ".json"), small_config(dir / "tree"));
    fs::remove_all(dir / "tree");
    for (const char* cmd : {"phantom", "train", "detect", "eval", "report"})
      ASSERT_EQ(run_cli(std::string(cmd) + " --config " + (dir / (std::string(name) + ".json")).string(), dir / "log.txt"), 0)
          << cmd << ": " << slurp(dir / "log.txt");
    fs::rename(dir / "tree", dir / name);
  }
  const auto a = tree(dir / "a"), b = tree(dir / "b");
  EXPECT_EQ(a.size(), b.size());
  EXPECT_TRUE(a == b);
}
