#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "pemnet/hash.hpp"
#include "pemnet/netcore.hpp"

using namespace pemnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result pemnet_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("pemnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }
  std::string write(const std::string& rel, const std::string& text) const {
    std::ofstream(root_ / rel) << text;
    return path(rel);
  }
  Result generate(const std::string& out, const std::string& n = "1500", const std::string& seed = "7") const {
    return pemnet_run({"generate", "--out", path(out), "--subsample", n, "--seed", seed});
  }
  std::string synth_mea() const {
    const auto cfg = write("synth.cfg",
                           "device = MEA0\nid = T1\ntemps_c = 160, 200, 220\nholdout_c = 200\n"
                           "points_per_condition = 6\ndesign.iec_mem = 2.5\ndesign.iec_io = 2.0\n"
                           "perturb.ohmic_scale = 1.2\n");
    EXPECT_EQ(pemnet_run({"synth", "--config", cfg, "--out", path("synth")}).code, 0);
    return path("synth/T1.csv");
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, GenerateIsDeterministic) {
  ASSERT_EQ(generate("a").code, 0);
  ASSERT_EQ(generate("b").code, 0);
  EXPECT_EQ(sha256_file(path("a/dataset.bin")), sha256_file(path("b/dataset.bin")));
  EXPECT_EQ(sha256_file(path("a/standardizer.json")), sha256_file(path("b/standardizer.json")));
  const auto m = cli::RunManifest::load(path("a/manifest.json"));
  EXPECT_EQ(m.command, "generate");
  for (const auto& f : m.outputs) EXPECT_EQ(f.sha256, sha256_file(path("a/" + f.path)));
  EXPECT_EQ(m.seeds.at("subsample"), 7u);
}

TEST_F(CliTest, MalformedLevelsLeaveNoFiles) {
  const auto cfg = write("bad.cfg", "levels.s_h2 = 1.0, oops\n");
  const auto r = pemnet_run({"generate", "--config", cfg, "--out", path("gen")});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_FALSE(fs::exists(path("gen")));
  EXPECT_NE(r.err.find("configuration error"), std::string::npos);
}

TEST_F(CliTest, UnwritableOutputIsConfigError) {
  write("plainfile", "x");
  EXPECT_EQ(generate("plainfile/sub").code, cli::kExitConfig);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(pemnet_run({}).code, cli::kExitConfig);
  EXPECT_EQ(pemnet_run({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(pemnet_run({"generate", "--out", path("x"), "--bogus"}).code, cli::kExitConfig);
  EXPECT_EQ(pemnet_run({"pretrain", "--out", path("x"), "--dataset", path("none.bin")}).code, cli::kExitConfig);
  const auto cfg = write("p.cfg", "arch = convnet\nepochs = 1\n");
  EXPECT_EQ(pemnet_run({"pretrain", "--config", cfg, "--out", path("x"), "--dataset", path("none.bin")}).code,
            cli::kExitConfig);
  const auto unknown = write("u.cfg", "arch = convnet\nlearning_rate = 1\n");
  ASSERT_EQ(generate("g").code, 0);
  EXPECT_EQ(pemnet_run({"pretrain", "--config", unknown, "--out", path("x"), "--dataset", path("g/dataset.bin")}).code,
            cli::kExitConfig);
}

TEST_F(CliTest, StaleInputIsRefused) {
  ASSERT_EQ(generate("g").code, 0);
  {
    std::fstream f(path("g/dataset.bin"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x7f');
  }
  const auto cfg = write("p.cfg", "arch = fcnet\nepochs = 1\n");
  const auto r = pemnet_run({"pretrain", "--config", cfg, "--out", path("pre"), "--dataset", path("g/dataset.bin")});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("stale"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("pre/model.bin")));
}

TEST_F(CliTest, ReproduceGenerate) {
  ASSERT_EQ(generate("g").code, 0);
  const auto r = pemnet_run({"reproduce", "--manifest", path("g/manifest.json"), "--out", path("again")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("reproduction OK"), std::string::npos);
}

TEST_F(CliTest, FreshModelEvaluatesWithoutCrash) {
  const auto csv = synth_mea();
  auto m = net::build_convnet(1);
  m.standardizer = dataset::Standardizer::identity();
  net::save_model(m, path("fresh.model"));
  const auto r = pemnet_run({"evaluate", "--model", path("fresh.model"), "--target", csv, "--out", path("ev")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto open = r.out.find('[');
  ASSERT_NE(open, std::string::npos) << r.out;  // held-out column is bracketed
  EXPECT_GT(std::stod(r.out.substr(open + 1)), 10.0) << r.out;
  EXPECT_EQ(pemnet_run({"evaluate", "--model", path("fresh.model"), "--out", path("ev")}).code, cli::kExitConfig);
}

TEST_F(CliTest, SyntheticTargetRejectsUnknownFields) {
  const auto cfg = write("s.cfg", "device = MEA0\ndesign.humidity = 3\n");
  EXPECT_EQ(pemnet_run({"synth", "--config", cfg, "--out", path("s")}).code, cli::kExitConfig);
  const auto dev = write("d.cfg", "device = MEA9\n");
  EXPECT_EQ(pemnet_run({"synth", "--config", dev, "--out", path("s")}).code, cli::kExitConfig);
}

TEST_F(CliTest, PipelineAndReproduction) {
  ASSERT_EQ(generate("g", "1500").code, 0);
  const auto pre_cfg = write("pre.cfg", "arch = convnet\nlr0 = 1e-3\nbatch_size = 64\nepochs = 2\n");
  auto r = pemnet_run({"pretrain", "--config", pre_cfg, "--dataset", path("g/dataset.bin"), "--out", path("pre"),
                       "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = nlohmann::json::parse(std::ifstream(path("pre/metrics.json")));
  EXPECT_EQ(metrics["train_records"], 1350);

  const auto csv = synth_mea();
  const auto ft_cfg = write("ft.cfg", "scheme = 1e-8, 8e-6, 2e-4\nbatch_size = 5\nepochs = 30\nrun.T1.epochs = 20\n");
  r = pemnet_run({"finetune", "--config", ft_cfg, "--source", path("pre/model.bin"), "--target", csv, "--out",
                  path("ft"), "--seed", "2", "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream prov(path("ft/provenance.jsonl"));
  std::string line;
  std::getline(prov, line);
  const auto rec = nlohmann::json::parse(line);
  EXPECT_EQ(rec["epochs"], 20);
  EXPECT_TRUE(rec.contains("holdout_rrmse_percent"));

  const auto two = write("two.cfg", "scheme = 1e-8, 2e-4\n");
  EXPECT_EQ(pemnet_run({"finetune", "--config", two, "--source", path("pre/model.bin"), "--target", csv, "--out",
                        path("ft2")})
                .code,
            cli::kExitConfig);

  r = pemnet_run({"evaluate", "--model", path("ft/T1.model"), "--target", csv, "--out", path("ev")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("EEM"), std::string::npos);
  fs::path run_dir;
  for (const auto& e : fs::directory_iterator(path("ev"))) run_dir = e.path();
  EXPECT_EQ(run_dir.filename().string().size(), 16u);
  EXPECT_TRUE(fs::exists(run_dir / "report.json"));

  r = pemnet_run({"dispersion", "--target", csv, "--standardizer", path("g/standardizer.json"), "--out", path("disp")});
  ASSERT_EQ(r.code, 0) << r.err;

  for (const auto& [name, manifest] : {std::pair{"pre", path("pre/manifest.json")},
                                       std::pair{"ft", path("ft/manifest.json")},
                                       std::pair{"ev", (run_dir / "manifest.json").string()}}) {
    r = pemnet_run({"reproduce", "--manifest", manifest, "--out", path(std::string("re_") + name)});
    EXPECT_EQ(r.code, 0) << name << ": " << r.out << r.err;
  }
}
