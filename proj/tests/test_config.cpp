#include <gtest/gtest.h>

#include <sstream>

#include "kakeya/experiments.hpp"

using namespace kakeya;

TEST(Config, NumbersAndLists) {
  EXPECT_DOUBLE_EQ(parse_number("2^-4"), 0.0625);
  EXPECT_DOUBLE_EQ(parse_number(" 1e-3 "), 1e-3);
  EXPECT_THROW(parse_number("abc"), ConfigError);
  Json l = expand_list("2^-4..2^-6");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_DOUBLE_EQ(l[2].get<double>(), 1.0 / 64);
  EXPECT_EQ(expand_list("0.5, 0.25").size(), 2u);
  EXPECT_THROW(expand_list("2^-4..3^-6"), ConfigError);
}

TEST(Config, TomlSubset) {
  Json j = parse_toml(R"(
experiment = "transversality"  # comment
seed = 7
[output]
format = "json"
r_list = [2^-3, 0.0625]
flag = true
)");
  EXPECT_EQ(j["experiment"], "transversality");
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["output.format"], "json");
  EXPECT_DOUBLE_EQ(j["output.r_list"][0].get<double>(), 0.125);
  EXPECT_EQ(j["output.flag"], true);
  EXPECT_THROW(parse_toml("novalue"), ConfigError);
}

TEST(Config, SchemaRejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(resolve_config("transversality", {{"bogus", 1}}), ConfigError);
  EXPECT_THROW(resolve_config("transversality", {{"triples", "many"}}), ConfigError);
  EXPECT_THROW(resolve_config("transversality", {{"triples", 1.5}}), ConfigError);
  EXPECT_THROW(resolve_config("no-such-experiment", Json::object()), ConfigError);
  EXPECT_THROW(resolve_config("transversality", {{"experiment", "listing2-check"}}), ConfigError);
  Json c = resolve_config("compression-scaling", {{"delta_list", "2^-4..2^-7"}, {"tolerance", "1e-1"}});
  EXPECT_EQ(c["delta_list"].size(), 4u);
  EXPECT_DOUBLE_EQ(c["tolerance"].get<double>(), 0.1);
}

TEST(Config, OverridesParseTomlValues) {
  auto [k, v] = parse_override("K=4");
  EXPECT_EQ(k, "K");
  EXPECT_EQ(v, 4);
  auto [k2, v2] = parse_override("family=sl2-chart");
  EXPECT_EQ(v2, "sl2-chart");
  EXPECT_THROW(parse_override("noequals"), ConfigError);
}

TEST(Emit, MetadataRoundTripsToTheSameConfig) {
  Json cfg = resolve_config("open-condition-scan", {{"samples", 20}, {"seed", 5}});
  ExperimentResult r = run_experiment(cfg);
  std::ostringstream os;
  emit(r, "json", os);
  Json back = resolve_config("open-condition-scan", parse_config_text(os.str(), true));
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(Json::parse(os.str())["metadata"].count("wall_seconds"), 0u);
}

TEST(Emit, EmptyResultIsHeaderOnlyCsv) {
  ExperimentResult r;
  r.columns = {"a", "b"};
  std::ostringstream os;
  emit(r, "csv", os);
  EXPECT_EQ(os.str(), "a,b\n");
}

TEST(Emit, CsvQuotingAndSeventeenDigits) {
  ExperimentResult r;
  r.columns = {"x", "s"};
  r.rows.push_back({0.1, "a,b"});
  std::ostringstream os;
  emit(r, "csv", os);
  EXPECT_EQ(os.str(), "x,s\n0.10000000000000001,\"a,b\"\n");
  EXPECT_EQ(fmt17(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Emit, PlotSeriesCarrySlope) {
  ExperimentResult r;
  r.experiment = "demo";
  r.summary = Json{{"slope", 1.5}};
  r.series.push_back({"s", {{-4, -6}, {-5, -7.5}}});
  std::ostringstream os;
  emit(r, "plot", os);
  EXPECT_NE(os.str().find("# slope = 1.5"), std::string::npos);
  EXPECT_NE(os.str().find("-5 -7.5\n"), std::string::npos);
  EXPECT_THROW(emit(r, "xml", os), ConfigError);
}

TEST(Experiments, EveryVerdictNamesItsInvariant) {
  for (const char* name : {"listing2-check", "compression-table", "open-condition-scan"}) {
    ExperimentResult r = run_experiment(resolve_config(name, {{"seed", 3}}));
    ASSERT_FALSE(r.verdicts.empty()) << name;
    for (const auto& v : r.verdicts) EXPECT_FALSE(v.invariant.empty()) << name;
  }
}

TEST(Experiments, SeedChangesSamplesButNotVerdicts) {
  auto a = run_experiment(resolve_config("listing3-check", {{"seed", 1}, {"samples", 5}}));
  auto b = run_experiment(resolve_config("listing3-check", {{"seed", 2}, {"samples", 5}}));
  EXPECT_NE(a.rows[0][0], b.rows[0][0]);
  EXPECT_TRUE(a.all_pass());
  EXPECT_TRUE(b.all_pass());
}

TEST(Parallel, ResultsInIndexOrderAndErrorsPropagate) {
  auto v = parallel_map<int>(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (int i = 0; i < 100; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i * i);
  EXPECT_THROW(parallel_map<int>(50, 3, [](std::size_t i) -> int {
                 if (i == 17) throw DomainError("boom");
                 return 0;
               }),
               DomainError);
}
