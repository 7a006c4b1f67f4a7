// kakeya-lab: command-line runner for the registered experiments.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kakeya/experiments.hpp"

using namespace kakeya;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out, format;
  std::optional<std::string> csv, json;
  std::optional<std::string> family, phase, delta_list, v_rule, matrix_poly;
  std::optional<int> grid, n_t, k, m_max;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "TOML or JSON config file");
  sub->add_option("--override", f.overrides, "key=value, repeatable");
  sub->add_option("--seed", f.seed, "64-bit seed");
  sub->add_option("--workers", f.workers, "worker threads (default: KAKEYA_LAB_WORKERS or 1)");
  sub->add_option("--out", f.out, "output path (default stdout)");
  sub->add_option("--format", f.format, "csv, json or plot")->check(CLI::IsMember({"csv", "json", "plot"}));
  sub->add_option("--csv", f.csv, "CSV output, optionally to a path")->expected(0, 1);
  sub->add_option("--json", f.json, "JSON output, optionally to a path")->expected(0, 1);
  sub->add_option("--family", f.family, "curve family label");
  sub->add_option("--phase", f.phase, "phase label");
  sub->add_option("--grid", f.grid, "grid points per parameter axis");
  sub->add_option("--n-t", f.n_t, "t samples per admissible interval");
  sub->add_option("--k", f.k, "contact-order length");
  sub->add_option("--m-max", f.m_max, "compression order cap");
  sub->add_option("--delta-list", f.delta_list, "e.g. 2^-4..2^-8 or 0.1,0.05");
  sub->add_option("--v-rule", f.v_rule, "fixed, random or witness");
  sub->add_option("--matrix-poly", f.matrix_poly, "file with a matrix_poly entry");
}

Json build_user_config(const std::string& name, const Flags& f) {
  Json user = f.config.empty() ? Json::object() : load_config_file(f.config);
  auto set = [&](const std::string& key, const Json& v) { user[key] = v; };
  if (f.family) set("family", *f.family);
  if (f.phase) set("phase", *f.phase);
  if (f.grid) set("grid", *f.grid);
  if (f.n_t) set("n_t", *f.n_t);
  if (f.k) set("k", *f.k);
  if (f.m_max) set("m_max", *f.m_max);
  if (f.delta_list) set("delta_list", expand_list(*f.delta_list));
  if (f.v_rule) set("v_rule", *f.v_rule);
  if (f.matrix_poly) {
    Json mp = load_config_file(*f.matrix_poly);
    if (!mp.contains("matrix_poly")) throw ConfigError("no matrix_poly entry in " + *f.matrix_poly);
    set("matrix_poly", mp["matrix_poly"]);
  }
  for (const auto& o : f.overrides) {
    auto [k, v] = parse_override(o);
    set(k, v);
  }
  if (f.seed) set("seed", *f.seed);
  if (f.workers) set("workers", *f.workers);
  if (f.csv) {
    set("output.format", "csv");
    if (!f.csv->empty()) set("output.path", *f.csv);
  }
  if (f.json) {
    set("output.format", "json");
    if (!f.json->empty()) set("output.path", *f.json);
  }
  if (!f.format.empty()) set("output.format", f.format);
  if (!f.out.empty()) set("output.path", f.out);
  return resolve_config(name, user);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kakeya-lab: curve-family classification, compression and discretized Kakeya experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::string> names;
  for (const auto& e : experiment_registry()) {
    names.push_back(e.name);
    add_flags(app.add_subcommand(e.name, e.description), flags);
  }
  auto* run = app.add_subcommand("run", "run the experiment named in --config");
  add_flags(run, flags);
  auto* list = app.add_subcommand("list", "list experiments and their default configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const auto& e : experiment_registry()) {
      std::cout << e.name << ": " << e.description << "\n";
      for (auto it = e.schema.begin(); it != e.schema.end(); ++it) std::cout << "  " << it.key() << " = " << it->dump() << "\n";
    }
    return 0;
  }

  Json cfg;
  try {
    std::string name;
    if (run->parsed()) {
      if (flags.config.empty()) throw ConfigError("run needs --config");
      Json user = load_config_file(flags.config);
      if (!user.contains("experiment") || !user["experiment"].is_string())
        throw ConfigError("config has no experiment name");
      name = user["experiment"];
    } else {
      name = app.get_subcommands().front()->get_name();
    }
    cfg = build_user_config(name, flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    ExperimentResult r = run_experiment(cfg);
    std::string fmt = cfg["output.format"], path = cfg["output.path"];
    bool timing = cfg["record_timing"];
    if (path.empty())
      emit(r, fmt, std::cout, timing);
    else
      emit_file(r, fmt, path, timing);
    for (const auto& v : r.verdicts)
      std::cerr << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.invariant << " (measured " << fmt17(v.measured)
                << ", threshold " << fmt17(v.threshold) << ")\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    std::cerr << r.experiment << ": wall " << buf << " s\n";
    return r.all_pass() ? 0 : 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
