#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(KAKEYA_LAB_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) { return std::string(KAKEYA_TEST_TMP) + "/" + name; }

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("listing2-check --override points=50"), 0);
  EXPECT_EQ(run("listing2-check --override nonsense=1"), 2);
  EXPECT_EQ(run("listing2-check --format yaml"), 2);
  EXPECT_EQ(run("no-such-subcommand"), 2);
  EXPECT_EQ(run("compression-scaling --override case=worst --override expected_exponent=2"), 3);
  EXPECT_EQ(run("transversality --override family=straight-hairbrush --override triples=5"), 1);
}

TEST(Cli, CsvFileAndConfigRoundTrip) {
  std::string csv = tmp("probe.csv"), js = tmp("probe.json"), again = tmp("probe2.json");
  ASSERT_EQ(run("kakeya-probe --delta-list 2^-2..2^-4 --v-rule fixed --seed 3 --csv " + csv), 0);
  std::string head = slurp(csv).substr(0, slurp(csv).find('\n'));
  EXPECT_EQ(head, "delta,num_curves,lambda_min,measure,multiplicity_mu,sigma,bush_size,hairbrush_size,exponent_fit");
  ASSERT_EQ(run("kakeya-probe --delta-list 2^-2..2^-4 --v-rule fixed --seed 3 --format json --out " + js), 0);
  ASSERT_EQ(run("run --config " + js + " --out " + again), 0);
  auto a = nlohmann::json::parse(slurp(js)), b = nlohmann::json::parse(slurp(again));
  EXPECT_EQ(b["metadata"]["config"]["output.path"], again);
  b["metadata"]["config"]["output.path"] = a["metadata"]["config"]["output.path"];
  EXPECT_EQ(a, b);
}

TEST(Cli, TomlConfig) {
  std::string cfg = tmp("c.toml"), out = tmp("c.csv");
  std::ofstream(cfg) << "experiment = \"compression-table\"\nrandom_samples = 10\n[output]\nformat = \"csv\"\n";
  ASSERT_EQ(run("run --config " + cfg + " --out " + out), 0);
  std::string s = slurp(out);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 13);
}

TEST(Cli, WorkerCountDoesNotChangeOutput) {
  std::string out = tmp("w.json");
  ASSERT_EQ(run("transversality --override triples=200 --format json --out " + out), 0);
  std::string one = slurp(out);
  std::string cmd = "KAKEYA_LAB_WORKERS=4 " + std::string(KAKEYA_LAB_BIN) +
                    " transversality --override triples=200 --format json --out " + out + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(one, slurp(out));
}
