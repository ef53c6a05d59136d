#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "thermoloss/landmark_io.hpp"

namespace {

using nlohmann::json;

const std::string kCli = THERMOLOSS_CLI;
const std::string kData = THERMOLOSS_DATA_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = kCli + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Recursive comparison: numbers to a relative tolerance, everything else exact.
void expect_json_near(const json& a, const json& b, const std::string& path = "") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    EXPECT_LE(std::abs(x - y), 1e-9 * std::max(1.0, std::abs(y))) << path;
    return;
  }
  ASSERT_EQ(a.type(), b.type()) << path;
  if (a.is_object()) {
    ASSERT_EQ(a.size(), b.size()) << path;
    for (auto it = b.begin(); it != b.end(); ++it) {
      ASSERT_TRUE(a.contains(it.key())) << path << "/" << it.key();
      expect_json_near(a.at(it.key()), it.value(), path + "/" + it.key());
    }
  } else if (a.is_array()) {
    ASSERT_EQ(a.size(), b.size()) << path;
    for (std::size_t i = 0; i < a.size(); ++i) expect_json_near(a[i], b[i], path + "/" + std::to_string(i));
  } else {
    EXPECT_EQ(a, b) << path;
  }
}

TEST(Cli, OtExactOnExample) {
  const auto r = run("ot exact --mu " + kData + "/examples/atom_origin.json --nu " + kData +
                     "/examples/atom_34.json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["command"], "ot exact");
  EXPECT_DOUBLE_EQ(j["result"]["cost"].get<double>(), 25.0);
}

TEST(Cli, LossEvalMatchesGolden) {
  const auto r = run("loss eval --problem " + kData + "/problems/toy16");
  ASSERT_EQ(r.code, 0);
  const auto got = json::parse(r.out);
  const auto golden = thermoloss::parse_json_file(kData + "/golden/toy16_loss_eval.json");
  expect_json_near(got["result"], golden["result"]);
  auto cfg = got["config"], gcfg = golden["config"];
  cfg.erase("problem");
  gcfg.erase("problem");
  expect_json_near(cfg, gcfg);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = std::filesystem::temp_directory_path() / "thermoloss_cli_test";
  std::filesystem::create_directories(dir);
  const auto cfg = (dir / "cfg.json").string();
  FILE* f = std::fopen(cfg.c_str(), "w");
  ASSERT_NE(f, nullptr);
  std::fputs("{\"lambda_e\": 0.01, \"tol\": 1e-6}", f);
  std::fclose(f);
  const auto r = run("--config " + cfg + " ot sinkhorn --mu " + kData + "/examples/mu4.json --nu " +
                     kData + "/examples/nu4.json --tol 1e-8");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["config"]["lambda_e"].get<double>(), 0.01);
  EXPECT_EQ(j["config"]["tol"].get<double>(), 1e-8);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("ot exact --mu /no/such/file --nu /no/such/file").code, 2);
  EXPECT_EQ(run("eval nme --manifest " + kData + "/examples/manifest4.jsonl --mode bogus").code, 2);
  EXPECT_EQ(run("ot sinkhorn --mu " + kData + "/examples/mu4.json --nu " + kData +
                "/examples/nu4.json --lambda-e 1e-9 --max-iters 1")
                .code,
            3);
}

TEST(Cli, EvalNmeOnManifest) {
  const auto r = run("eval nme --manifest " + kData + "/examples/manifest4.jsonl --sigma-bar 0.0025");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["result"]["failure_rate"].get<double>(), 0.5);
  EXPECT_NEAR(j["result"]["nme_mean"].get<double>(), 0.15, 1e-12);
}

}  // namespace
