#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "vcgan/cli.hpp"

using namespace vcgan;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vcgan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const std::string& json) {
    const auto p = dir_ / name;
    write_text_file(p, json);
    return p.string();
  }

  static std::string small_config(const std::string& extra = "", int iterations = 3) {
    return R"({"schema_version": 1, "preset": "ring8", "M": 10, "N": 4, "hidden": 8,
               "batch_size": 16, "trace_every": 1, "eval_samples": 1000,
               "eval_per_path": 200, "iterations": )" +
           std::to_string(iterations) + extra + "}";
  }

  fs::path dir_;
};

Json single_line_error(const std::string& err) {
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
  return Json::parse(err);
}

}  // namespace

TEST_F(CliTest, AmpPrintsSolvedAmplitude) {
  const CliRun r = cli({"amp", "--n", "10", "--l", "118", "--delta", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j["h"].get<double>(), 7.8455, 1e-4);
  EXPECT_NEAR(j["b"].get<double>(), -0.78455, 1e-5);
  EXPECT_NEAR(j["A"].get<double>(), 7.060949, 1e-6);
  EXPECT_EQ(j["schema_version"], 1);
}

TEST_F(CliTest, AmpErrorsAreSingleLineJson) {
  const CliRun zero = cli({"amp", "--n", "10", "--l", "118", "--delta", "0"});
  EXPECT_EQ(zero.code, 1);
  const Json e = single_line_error(zero.err);
  EXPECT_EQ(e["error"], "config");
  EXPECT_NE(e["message"].get<std::string>().find("no real amplitude"), std::string::npos);

  const CliRun usage = cli({"amp", "--n", "10"});
  EXPECT_EQ(usage.code, 1);
  EXPECT_EQ(single_line_error(usage.err)["error"], "usage");
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
}

TEST_F(CliTest, HelpExitsZero) {
  const CliRun r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("verify-geometry"), std::string::npos);
}

TEST_F(CliTest, ConfigValidation) {
  auto run_train = [&](const std::string& json) {
    return cli({"train", "--config", write_config("c.json", json), "--out", (dir_ / "o").string()});
  };
  const CliRun empty = run_train("{}");
  EXPECT_EQ(empty.code, 1);
  EXPECT_NE(single_line_error(empty.err)["message"].get<std::string>().find("preset"),
            std::string::npos);

  const CliRun mn = run_train(R"({"preset": "ring8", "M": 10, "N": 10})");
  EXPECT_EQ(mn.code, 1);
  EXPECT_NE(mn.err.find("'M/N'"), std::string::npos) << mn.err;

  const CliRun delta = run_train(R"({"preset": "ring8", "delta": 0})");
  EXPECT_EQ(delta.code, 1);
  EXPECT_NE(delta.err.find("'delta'"), std::string::npos) << delta.err;

  const CliRun decay = run_train(R"({"preset": "ring8", "lr_decay": "cosine"})");
  EXPECT_EQ(decay.code, 1);
  EXPECT_NE(decay.err.find("'lr_decay'"), std::string::npos) << decay.err;

  const CliRun unknown = run_train(R"({"preset": "ring8", "learning_rate": 0.1})");
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("learning_rate"), std::string::npos) << unknown.err;

  const CliRun bad_json = run_train("{not json");
  EXPECT_EQ(bad_json.code, 1);
  single_line_error(bad_json.err);

  EXPECT_EQ(run_train(R"({"preset": "ring8", "schema_version": 2})").code, 1);
  EXPECT_FALSE(fs::exists(dir_ / "o" / "model.json"));
}

TEST_F(CliTest, ZeroIterationTrainWritesModelAndHeaderOnlyTrace) {
  const auto cfg = write_config("c.json", small_config("", 0));
  const CliRun r = cli({"train", "--config", cfg, "--out", (dir_ / "run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(dir_ / "run" / "trace.csv"), "iteration,critic_loss,gen_loss,p_1,p_2,p_3,p_4\n");
  const Json model = Json::parse(read_text_file(dir_ / "run" / "model.json"));
  EXPECT_EQ(model["schema_version"], 1);
  EXPECT_EQ(model["generator_steps"], 0);
  const LoadedModel m = load_model(dir_ / "run" / "model.json");
  EXPECT_EQ(m.generator.layout.N, 4u);
}

TEST_F(CliTest, TrainSampleMetricsRoundTrip) {
  const auto cfg = write_config("c.json", small_config(R"(, "sample_every": 2, "sample_count": 50)"));
  const auto run = dir_ / "run";
  const CliRun t = cli({"train", "--config", cfg, "--out", run.string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(Json::parse(t.out)["iterations"], 3);
  EXPECT_TRUE(fs::exists(run / "samples_2.csv"));
  const std::string trace = read_text_file(run / "trace.csv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);

  const std::string model = (run / "model.json").string();
  const CliRun s = cli({"sample", "--model", model, "--count", "20", "--seed", "3"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out.substr(0, s.out.find('\n')), "x,y,path");
  EXPECT_EQ(std::count(s.out.begin(), s.out.end(), '\n'), 21);

  const CliRun p = cli({"sample", "--model", model, "--path", "2", "--count", "5"});
  ASSERT_EQ(p.code, 0);
  std::istringstream rows(p.out);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) EXPECT_EQ(line.substr(line.rfind(',') + 1), "2");
  EXPECT_EQ(cli({"sample", "--model", model, "--path", "0"}).code, 1);
  EXPECT_EQ(cli({"sample", "--model", model, "--path", "5"}).code, 1);

  const CliRun m = cli({"metrics", "--model", model, "--samples", "1000", "--per-path", "200"});
  ASSERT_EQ(m.code, 0) << m.err;
  const Json report = Json::parse(m.out);
  EXPECT_EQ(report["preset"], "ring8");
  EXPECT_EQ(report["per_path_mode_histogram"].size(), 4u);
  const CliRun csv = cli({"metrics", "--model", model, "--csv", "--preset", "grid25", "--samples",
                       "1000", "--per-path", "200"});
  ASSERT_EQ(csv.code, 0) << csv.err;
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 2);
  EXPECT_EQ(cli({"metrics", "--model", model, "--samples", "999"}).code, 1);
  EXPECT_EQ(cli({"metrics", "--model", (dir_ / "missing.json").string()}).code, 1);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  const auto cfg = write_config("c.json", small_config());
  ASSERT_EQ(cli({"train", "--config", cfg, "--out", (dir_ / "a").string()}).code, 0);
  ASSERT_EQ(cli({"train", "--config", cfg, "--out", (dir_ / "b").string()}).code, 0);
  EXPECT_EQ(read_text_file(dir_ / "a" / "model.json"), read_text_file(dir_ / "b" / "model.json"));
  EXPECT_EQ(read_text_file(dir_ / "a" / "trace.csv"), read_text_file(dir_ / "b" / "trace.csv"));
  const auto d1 = cli({"data", "--preset", "grid25", "--count", "100", "--seed", "4"});
  const auto d2 = cli({"data", "--preset", "grid25", "--count", "100", "--seed", "4"});
  EXPECT_EQ(d1.out, d2.out);
}

TEST_F(CliTest, DataCsvUsesOneBasedComponents) {
  const auto out = dir_ / "d.csv";
  ASSERT_EQ(cli({"data", "--preset", "imbalanced2-73", "--count", "200", "--seed", "1", "--out",
                 out.string()})
                .code,
            0);
  std::istringstream rows(read_text_file(out));
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "x,y,component");
  std::size_t n = 0;
  while (std::getline(rows, line)) {
    const std::string c = line.substr(line.rfind(',') + 1);
    EXPECT_TRUE(c == "1" || c == "2") << line;
    ++n;
  }
  EXPECT_EQ(n, 200u);
  EXPECT_EQ(cli({"data", "--preset", "ring9"}).code, 1);
}

TEST_F(CliTest, SweepWritesPerSeedDirectoriesAndMedian) {
  const auto cfg = write_config("c.json", small_config());
  const auto out = dir_ / "sweep";
  const CliRun r = cli({"sweep", "--config", cfg, "--seeds", "5", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream rows(r.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(rows, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0].substr(0, 5), "seed,");
  for (int s = 0; s < 5; ++s) {
    EXPECT_EQ(lines[1 + s].substr(0, 2), std::to_string(s) + ",");
    EXPECT_TRUE(fs::exists(out / ("seed_" + std::to_string(s)) / "metrics.json"));
    EXPECT_TRUE(fs::exists(out / ("seed_" + std::to_string(s)) / "model.json"));
  }
  EXPECT_EQ(lines[6].substr(0, 7), "median,");
  EXPECT_EQ(read_text_file(out / "sweep.csv"), r.out);
  EXPECT_EQ(cli({"sweep", "--config", cfg}).code, 1);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const auto cfg = write_config("c.json", small_config());
  const auto env_dir = dir_ / "from_env";
  ::setenv(kOutputDirEnv, env_dir.c_str(), 1);
  const CliRun r = cli({"train", "--config", cfg});
  ::unsetenv(kOutputDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_dir / "model.json"));

  const auto cfg_dir = dir_ / "from_config";
  const auto cfg2 = write_config(
      "c2.json", small_config(R"(, "output_dir": ")" + cfg_dir.string() + "\""));
  ::setenv(kOutputDirEnv, env_dir.c_str(), 1);
  ASSERT_EQ(cli({"train", "--config", cfg2}).code, 0);
  ::unsetenv(kOutputDirEnv);
  EXPECT_TRUE(fs::exists(cfg_dir / "model.json"));
}

TEST_F(CliTest, FailedWritesLeaveNothingBehind) {
  {
    OutputGuard guard;
    const auto p = dir_ / "partial.csv";
    guard.track(p);
    write_text_file(p, "x,y\n");
    ASSERT_TRUE(fs::exists(p));
  }
  EXPECT_FALSE(fs::exists(dir_ / "partial.csv"));

  const auto blocked = dir_ / "blocked";
  write_text_file(blocked, "");
  const CliRun r = cli({"data", "--preset", "ring8", "--out", (blocked / "d.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(single_line_error(r.err)["error"], "io");
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = VCGAN_CLI_PATH;
  const std::string null = " >/dev/null 2>&1";
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + null).c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("amp --n 10 --l 118 --delta 2"), 0);
  EXPECT_EQ(status("amp --n 10 --l 118 --delta 0"), 1);
  EXPECT_EQ(status("nope"), 1);
}
