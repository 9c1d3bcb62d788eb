#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "omnivdiff/config.hpp"

using namespace ovd;

namespace fs = std::filesystem;

TEST_CASE("defaults form a valid configuration") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n_train == 64);
  CHECK(cfg.n_eval == 16);
  CHECK(cfg.frames == 8);
  CHECK(cfg.height == 32);
  CHECK(cfg.width == 32);
  CHECK(cfg.model_dim == 256);
  CHECK(cfg.depth == 4);
  CHECK(cfg.heads == 4);
  CHECK(cfg.steps == 2000);
  CHECK(cfg.codec().channels() == 96);
}

TEST_CASE("every known key round-trips through set/get") {
  RunConfig cfg;
  for (const std::string& key : RunConfig::known_keys()) {
    std::string v = cfg.get(key);
    RunConfig other;
    CHECK_NOTHROW(other.set(key, v));
    CHECK(other.get(key) == v);
  }
}

TEST_CASE("unknown keys are rejected") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("learning_rate", "0.1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get("nope"), std::invalid_argument);
}

TEST_CASE("typed parsing rejects malformed values") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("steps", "many"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("steps", "12x"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("lr", "fast"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("use_msph", "yes"), std::invalid_argument);
  CHECK_NOTHROW(cfg.set("use_msph", "0"));
  CHECK_NOTHROW(cfg.set("use_msph", "true"));
}

TEST_CASE("task mixture parses five comma-separated weights") {
  RunConfig cfg;
  cfg.set("task_mixture", "0.5, 0.2, 0.1, 0.1, 0.1");
  CHECK(cfg.task_mixture[0] == doctest::Approx(0.5));
  CHECK(cfg.task_mixture[4] == doctest::Approx(0.1));
  CHECK_THROWS_AS(cfg.set("task_mixture", "0.5,0.5"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("task_mixture", "1,0,0,0,0,0"), std::invalid_argument);
}

TEST_CASE("stage presets override the mixture") {
  RunConfig cfg;
  cfg.task_mixture = {0.6, 0.1, 0.1, 0.1, 0.1};
  cfg.stage = 1;
  CHECK(cfg.effective_mixture() == std::array<double, kNumTasks>{1.0, 0.0, 0.0, 0.0, 0.0});
  cfg.stage = 2;
  CHECK(cfg.effective_mixture() == std::array<double, kNumTasks>{0.2, 0.2, 0.2, 0.2, 0.2});
  cfg.stage = 0;
  CHECK(cfg.effective_mixture()[0] == doctest::Approx(0.6));
  cfg.stage = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config files parse with comments and blank lines") {
  std::string path = (fs::temp_directory_path() / "run_cfg_test.txt").string();
  {
    std::ofstream f(path);
    f << "# toy run\n\nsteps = 100\nmodel_dim=64\n  lr = 0.001  \nout_dir=results\n";
  }
  RunConfig cfg = RunConfig::from_file(path);
  CHECK(cfg.steps == 100);
  CHECK(cfg.model_dim == 64);
  CHECK(cfg.lr == doctest::Approx(0.001));
  CHECK(cfg.out_dir == "results");
  std::remove(path.c_str());

  CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/cfg.txt"), std::invalid_argument);
}

TEST_CASE("config files reject malformed lines and unknown keys") {
  std::string path = (fs::temp_directory_path() / "run_cfg_bad.txt").string();
  {
    std::ofstream f(path);
    f << "steps 100\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "stepz=100\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
  std::remove(path.c_str());
}

TEST_CASE("validation catches inconsistent geometry") {
  RunConfig cfg;
  cfg.height = 30;  // not divisible by codec_fh
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.model_dim = 30;  // not divisible by heads
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.task_mixture = {0.9, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.sr_factor = 5;  // 32 % 5 != 0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("derived configs agree with the schema values") {
  RunConfig cfg;
  cfg.set("frames", "16");
  cfg.set("codec_ft", "4");
  cfg.set("model_dim", "128");
  ModelConfig mc = cfg.model();
  CHECK(mc.tokens_f == 4);
  CHECK(mc.tokens_h == 8);
  CHECK(mc.tokens_w == 8);
  CHECK(mc.latent_channels == 3 * 4 * 4 * 4);
  CHECK(mc.model_dim == 128);
  TrainConfig tc = cfg.train();
  CHECK(tc.steps == cfg.steps);
  CHECK(tc.task_mixture == cfg.effective_mixture());
  SamplerConfig sc = cfg.sampler();
  CHECK(sc.steps == cfg.sampler_steps);
}
