#pragma once

// Named experiments: schema, runner and result emission.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kakeya/classifier.hpp"
#include "kakeya/compression.hpp"
#include "kakeya/config.hpp"
#include "kakeya/discrete.hpp"
#include "kakeya/families.hpp"
#include "kakeya/parallel.hpp"
#include "kakeya/rng.hpp"

#ifndef KAKEYA_LAB_VERSION
#define KAKEYA_LAB_VERSION "0.1.0"
#endif

namespace kakeya {

struct Verdict {
  std::string name;
  std::string invariant;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ExperimentResult {
  std::string experiment;
  Json config = Json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
  std::vector<Verdict> verdicts;
  Json summary = Json::object();
  std::vector<Series> series;
  double wall_seconds = 0.0;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
  void verdict(std::string name, std::string invariant, bool pass, double measured, double threshold) {
    verdicts.push_back({std::move(name), std::move(invariant), pass, measured, threshold});
  }
};

inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline Json num(double x) {
  if (std::isfinite(x)) return x;
  return fmt17(x);
}

inline std::string csv_cell(const Json& j) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
  if (j.is_number()) return fmt17(j.get<double>());
  if (j.is_null()) return "";
  return j.dump();
}

// 17-significant-digit rendering of every double in a JSON tree.
inline void dump_json(const Json& j, std::ostream& os, int indent = 0) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  std::string pad2(static_cast<std::size_t>(indent + 2), ' ');
  if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) os << ",\n";
      first = false;
      os << pad2 << Json(it.key()).dump() << ": ";
      dump_json(*it, os, indent + 2);
    }
    os << "\n" << pad << "}";
  } else if (j.is_array()) {
    bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
    if (j.empty()) {
      os << "[]";
      return;
    }
    if (flat) {
      os << "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ", ";
        dump_json(j[i], os, indent);
      }
      os << "]";
      return;
    }
    os << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) os << ",\n";
      os << pad2;
      dump_json(j[i], os, indent + 2);
    }
    os << "\n" << pad << "]";
  } else if (j.is_number_float()) {
    os << fmt17(j.get<double>());
  } else {
    os << j.dump();
  }
}

inline Json result_json(const ExperimentResult& r, bool record_timing) {
  Json out = Json::object();
  out["experiment"] = r.experiment;
  Json meta = Json::object();
  meta["version"] = KAKEYA_LAB_VERSION;
  meta["config"] = r.config;
  if (record_timing) meta["wall_seconds"] = r.wall_seconds;
  out["metadata"] = meta;
  out["summary"] = r.summary;
  Json vs = Json::array();
  for (const auto& v : r.verdicts)
    vs.push_back(Json{{"name", v.name}, {"invariant", v.invariant}, {"pass", v.pass}, {"measured", num(v.measured)},
                      {"threshold", num(v.threshold)}});
  out["verdicts"] = vs;
  out["columns"] = r.columns;
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(Json(row));
  out["rows"] = rows;
  Json ss = Json::array();
  for (const auto& s : r.series) {
    Json pts = Json::array();
    for (auto [x, y] : s.points) pts.push_back(Json::array({num(x), num(y)}));
    ss.push_back(Json{{"name", s.name}, {"points", pts}});
  }
  out["series"] = ss;
  return out;
}

inline void emit(const ExperimentResult& r, const std::string& format, std::ostream& os, bool record_timing = false) {
  if (format == "csv") {
    for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
    os << "\n";
    for (const auto& row : r.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
      os << "\n";
    }
  } else if (format == "json") {
    dump_json(result_json(r, record_timing), os);
    os << "\n";
  } else if (format == "plot") {
    os << "# experiment " << r.experiment << "\n";
    for (auto it = r.summary.begin(); it != r.summary.end(); ++it)
      if (it->is_primitive()) os << "# " << it.key() << " = " << csv_cell(*it) << "\n";
    for (const auto& s : r.series) {
      os << "\n# series " << s.name << "\n";
      for (auto [x, y] : s.points) os << fmt17(x) << " " << fmt17(y) << "\n";
    }
  } else {
    throw ConfigError("unknown output format: " + format);
  }
}

inline void emit_file(const ExperimentResult& r, const std::string& format, const std::string& path,
                      bool record_timing = false) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write output: " + path);
  emit(r, format, f, record_timing);
  if (!f) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Helpers

inline Vec2d annulus_sample(const CounterRng& rng, std::uint64_t i, std::uint64_t slot, double lo = 0.5,
                            double hi = 1.0) {
  double a = rng.uniform(i, slot, 0.0, 2.0 * 3.14159265358979323846);
  double r = rng.uniform(i, slot + 1, lo, hi);
  return {r * std::cos(a), r * std::sin(a)};
}

// Admissible (p, theta, t) drawn from the family box shrunk toward its centre.
inline std::optional<GridPoint> sample_admissible(const CurveFamily& F, const CounterRng& rng, std::uint64_t i,
                                                  double shrink = 0.0) {
  for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
    std::uint64_t k = i * 256 + attempt;
    double v[3];
    for (int a = 0; a < 3; ++a) {
      const Interval& iv = F.param_box[static_cast<std::size_t>(a)];
      double c = 0.5 * (iv.lo + iv.hi), h = 0.5 * iv.length() * (1.0 - shrink);
      v[a] = rng.uniform(k, static_cast<std::uint64_t>(a), c - h, c + h);
    }
    if (!F.params_in_domain(v[0], v[1], v[2])) continue;
    auto dom = F.t_domain(v[0], v[1], v[2]);
    if (dom.empty()) continue;
    auto& iv = dom[std::min(dom.size() - 1, static_cast<std::size_t>(rng.uniform(k, 3) * static_cast<double>(dom.size())))];
    double c = 0.5 * (iv.lo + iv.hi), h = 0.5 * iv.length() * (1.0 - shrink);
    return GridPoint{v[0], v[1], v[2], rng.uniform(k, 4, c - h, c + h)};
  }
  return std::nullopt;
}

inline MatrixPoly matrix_poly_from_json(const Json& j) {
  MatrixPoly A;
  A.a.push_back(Eigen::Matrix2d::Zero());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw ConfigError("matrix_poly entries must be [a11, a12, a22]");
    A.a.push_back(sym2(e[0].get<double>(), e[1].get<double>(), e[2].get<double>()));
  }
  return A;
}

inline Json matrix_poly_to_json(const MatrixPoly& A) {
  Json out = Json::array();
  for (int k = 1; k <= A.degree(); ++k) {
    const auto& m = A.a[static_cast<std::size_t>(k)];
    out.push_back(Json::array({m(0, 0), m(0, 1), m(1, 1)}));
  }
  return out;
}

inline Eigen::Matrix2d sym_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("symmetric matrices are written [a11, a12, a22]");
  return sym2(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Vec2d vec2_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline int resolved_workers(const Json& cfg) {
  int w = cfg.value("workers", 0);
  return w > 0 ? w : default_workers();
}

inline Eigen::Matrix2d random_sym(const CounterRng& rng, std::uint64_t i, std::uint64_t slot, double range) {
  return sym2(rng.uniform(i, slot, -range, range), rng.uniform(i, slot + 1, -range, range),
              rng.uniform(i, slot + 2, -range, range));
}

// Listing-3 limits along (t, theta) = (s a, -s b), Richardson-extrapolated from s and s/2.
struct Listing3Limit {
  double cone = 0.0;  // lim (t - theta) cone_det
  double det_M = 0.0;
};

inline Listing3Limit listing3_limit(const CurveFamily& F, const Vec2d& xi, double s, double a, double b) {
  auto at = [&](double sc, double& c, double& m) {
    double t = sc * a, th = -sc * b;
    PointReport r = classify_point(F, xi[0], xi[1], th, t);
    c = (t - th) * r.cone_det;
    m = r.det_M;
  };
  double c1, m1, c2, m2;
  at(s, c1, m1);
  at(0.5 * s, c2, m2);
  return {2.0 * c2 - c1, 2.0 * m2 - m1};
}

inline double listing3_Q(const Eigen::Matrix2d& B, const Vec2d& xi) {
  return B(0, 1) * xi[0] * xi[0] + (B(0, 0) + B(1, 1)) * xi[0] * xi[1] + B(0, 1) * xi[1] * xi[1];
}

// ---------------------------------------------------------------------------
// Experiments

using ExperimentFn = std::function<ExperimentResult(const Json&)>;

struct ExperimentSpec {
  std::string name;
  std::string description;
  Json schema;
  ExperimentFn run;
};

inline Json common_schema() {
  return Json{{"experiment", ""},      {"seed", 0},          {"workers", 0},
              {"output.path", ""},     {"output.format", "csv"}, {"record_timing", false}};
}

inline Json with_common(Json s) {
  Json out = common_schema();
  for (auto it = s.begin(); it != s.end(); ++it) out[it.key()] = *it;
  return out;
}

inline ExperimentResult run_classify_grid(const Json& c) {
  ExperimentResult r;
  CurveFamily F = family_by_label(c["family"].get<std::string>());
  ClassifyOptions opt{c["cone_tol"].get<double>(), c["rank_tol"].get<double>()};
  std::vector<PointReport> reps;
  const Json& pt = c["point"];
  if (!pt.empty()) {
    if (pt.size() != 4) throw ConfigError("point must be [p1, p2, theta, t]");
    reps.push_back(classify_point(F, pt[0].get<double>(), pt[1].get<double>(), pt[2].get<double>(),
                                  pt[3].get<double>(), opt));
  } else {
    reps = classify_grid(F, c["grid"].get<int>(), c["n_t"].get<int>(), resolved_workers(c), opt);
  }
  r.columns = {"p1", "p2", "theta", "t", "cone_det", "gamma1", "gamma2", "det_M", "sv1", "sv2", "sv3", "coniness",
               "flatness"};
  if (c["per_point"].get<bool>() || !pt.empty())
    for (const auto& p : reps)
      r.rows.push_back({p.p1, p.p2, p.theta, p.t, p.cone_det, p.spread.omega_dot[0], p.spread.omega_dot[1], p.det_M,
                        p.singular_values[0], p.singular_values[1], p.singular_values[2], to_string(p.coniness),
                        to_string(p.flatness)});
  RegionSummary s = summarize(reps);
  double min_det_xp = std::numeric_limits<double>::infinity(), min_g = min_det_xp, max_g = 0.0;
  for (const auto& p : reps) {
    min_det_xp = std::min(min_det_xp, std::abs(p.spread.det_Xp));
    min_g = std::min(min_g, norm2(p.spread.omega_dot));
    max_g = std::max(max_g, norm2(p.spread.omega_dot));
  }
  r.summary = Json{{"family", F.label},
                   {"points", s.points},
                   {"planey", s.planey},
                   {"coney", s.coney},
                   {"twisty", s.twisty},
                   {"flat2", s.flat2},
                   {"flat1", s.flat1},
                   {"coniness", s.coniness_label()},
                   {"flatness", s.flatness_label()},
                   {"min_abs_cone_det", num(s.min_abs_cone_det)},
                   {"max_abs_cone_det", num(s.max_abs_cone_det)},
                   {"min_abs_det_M", num(s.min_abs_det_M)},
                   {"max_abs_det_M", num(s.max_abs_det_M)},
                   {"min_abs_det_Xp", num(min_det_xp)},
                   {"min_gamma", num(min_g)},
                   {"max_gamma", num(max_g)}};
  double floor = c["floor"].get<double>();
  r.verdict("basic-conditions", "min |det grad_p X| and min |gamma| above floor",
            s.points > 0 && min_det_xp > floor && min_g > floor, std::min(min_det_xp, min_g), floor);
  std::string ec = c["expect_coniness"], ef = c["expect_flatness"];
  if (!ec.empty())
    r.verdict("coniness", "region coniness label equals " + ec, s.coniness_label() == ec,
              static_cast<double>(ec == "planey" ? s.planey : s.coney), static_cast<double>(s.points));
  if (!ef.empty()) {
    std::size_t hit = ef == "twisty" ? s.twisty : ef == "flat2" ? s.flat2 : s.flat1;
    r.verdict("flatness", "region flatness label equals " + ef, s.flatness_label() == ef, static_cast<double>(hit),
              static_cast<double>(s.points));
  }
  return r;
}

inline ExperimentResult run_listing2(const Json& c) {
  ExperimentResult r;
  CurveFamily F = worst_hairbrush();
  CounterRng rng(c["seed"].get<std::uint64_t>(), "listing2-check");
  int n = c["points"].get<int>();
  double tol = c["tol"].get<double>();
  double max_cone = 0, max_err = 0;
  std::size_t not_flat1 = 0;
  r.columns = {"xi1", "xi2", "theta", "t", "cone_det", "max_entry_error", "flatness"};
  auto pts = parallel_map<PointReport>(static_cast<std::size_t>(n), resolved_workers(c), [&](std::size_t i) {
    auto g = sample_admissible(F, rng, i);
    if (!g) throw std::runtime_error("listing2: no admissible sample");
    return classify_point(F, g->p1, g->p2, g->theta, g->t);
  });
  for (const auto& p : pts) {
    Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
    E.row(0) << -p.p2, p.p1, -p.p2 * p.p2;
    double err = (p.M - E).cwiseAbs().maxCoeff();
    max_cone = std::max(max_cone, std::abs(p.cone_det));
    max_err = std::max(max_err, err);
    if (p.flatness != Flatness::Flat1) ++not_flat1;
    r.rows.push_back({p.p1, p.p2, p.theta, p.t, p.cone_det, err, to_string(p.flatness)});
  }
  r.summary = Json{{"points", n}, {"max_abs_cone_det", max_cone}, {"max_entry_error", max_err}};
  r.verdict("cone-det-zero", "|det(w', w'')| <= tol at every sample", max_cone <= tol, max_cone, tol);
  r.verdict("tangency-matrix", "M = [[-xi2, xi1, -xi2^2], 0, 0] entrywise", max_err <= tol, max_err, tol);
  r.verdict("rank-one", "every sample classified flat1", not_flat1 == 0, static_cast<double>(not_flat1), 0.0);
  return r;
}

inline ExperimentResult run_listing3(const Json& c) {
  ExperimentResult r;
  CounterRng rng(c["seed"].get<std::uint64_t>(), "listing3-check");
  int n = c["samples"].get<int>();
  double s = c["scale"].get<double>(), range = c["b_range"].get<double>(), tol = c["tol"].get<double>();
  r.columns = {"B11", "B12", "B22", "xi1", "xi2", "cone_limit", "cone_expected", "cone_rel_err",
               "det_M_limit", "det_M_expected", "det_M_rel_err"};
  struct Row {
    Eigen::Matrix2d B;
    Vec2d xi;
    Listing3Limit L;
  };
  auto rows = parallel_map<Row>(static_cast<std::size_t>(n), resolved_workers(c), [&](std::size_t i) {
    Row w;
    w.B = random_sym(rng, i, 0, range);
    w.xi = annulus_sample(rng, i, 3);
    w.L = listing3_limit(quadratic_hairbrush(w.B), w.xi, s, rng.uniform(i, 5, 0.5, 1.0), rng.uniform(i, 6, 0.5, 1.0));
    return w;
  });
  double worst_c = 0, worst_m = 0;
  for (const auto& w : rows) {
    double Q = listing3_Q(w.B, w.xi), d = w.B(1, 1) - w.B(0, 0);
    double ec = -2.0 * d * Q, em = -4.0 * d * d * Q * Q;
    double rc = std::abs(w.L.cone - ec) / std::abs(ec), rm = std::abs(w.L.det_M - em) / std::abs(em);
    worst_c = std::max(worst_c, rc);
    worst_m = std::max(worst_m, rm);
    r.rows.push_back({w.B(0, 0), w.B(0, 1), w.B(1, 1), w.xi[0], w.xi[1], w.L.cone, ec, rc, w.L.det_M, em, rm});
  }
  r.summary = Json{{"samples", n}, {"max_cone_rel_err", worst_c}, {"max_det_M_rel_err", worst_m}};
  r.verdict("cone-limit", "(t - theta) cone_det -> -2(B22-B11)Q(xi)", worst_c <= tol, worst_c, tol);
  r.verdict("det-M-limit", "det M -> -4(B22-B11)^2 Q(xi)^2", worst_m <= tol, worst_m, tol);
  return r;
}

inline ExperimentResult run_open_condition_scan(const Json& c) {
  ExperimentResult r;
  CounterRng rng(c["seed"].get<std::uint64_t>(), "open-condition-scan");
  int n = c["samples"].get<int>();
  double range = c["range"].get<double>();
  r.columns = {"B11", "B12", "B22", "C11", "C12", "C22", "margin", "sym_det", "holds", "definite"};
  std::size_t mismatches = 0, holds = 0;
  for (int i = 0; i < n; ++i) {
    auto B = random_sym(rng, static_cast<std::uint64_t>(i), 0, range);
    auto C = random_sym(rng, static_cast<std::uint64_t>(i), 3, range);
    OpenCondition oc = open_condition(B, C);
    bool definite = oc.sym_det > 0.0;
    if (std::abs(oc.margin) > 1e-12 && definite != oc.holds) ++mismatches;
    if (oc.holds) ++holds;
    r.rows.push_back({B(0, 0), B(0, 1), B(1, 1), C(0, 0), C(0, 1), C(1, 1), oc.margin, oc.sym_det, oc.holds, definite});
  }
  // A = I_+: Q = a (B^2 - C), whose symmetric part has det -(y^2 + ((z - x)/2)^2).
  int m = c["iplus_samples"].get<int>();
  double max_det = -std::numeric_limits<double>::infinity();
  Eigen::Matrix2d a;
  a << 0, 1, -1, 0;
  for (int i = 0; i < m; ++i) {
    auto B = random_sym(rng, static_cast<std::uint64_t>(n + i), 0, range);
    auto C = random_sym(rng, static_cast<std::uint64_t>(n + i), 3, range);
    Eigen::Matrix2d Q = a * (B * B - C);
    max_det = std::max(max_det, (0.5 * (Q + Q.transpose())).determinant());
  }
  r.summary = Json{{"samples", n}, {"holds", holds}, {"mismatches", mismatches}, {"iplus_max_sym_det", num(max_det)}};
  r.verdict("margin-vs-definite", "margin > 0 iff Sym(Q) is definite", mismatches == 0, static_cast<double>(mismatches),
            0.0);
  r.verdict("iplus-never-definite", "A = I_+ gives det Sym(Q) <= 0", m == 0 || max_det <= 1e-14, max_det, 0.0);
  return r;
}

struct TableRow {
  std::string name;
  CompressionResult res;
  double residual = 0.0;   // max |coeff| through order m
  double next_coeff = 0.0; // |coeff_{m+1}|
  double max_coeff = 0.0;  // max |coeff| overall
};

inline TableRow compression_row(std::string name, const MatrixPoly& A) {
  TableRow t;
  t.name = std::move(name);
  t.res = compression_order(A);
  const auto& w = t.res.witness_coeffs;
  for (std::size_t k = 0; k < w.size(); ++k) {
    t.max_coeff = std::max(t.max_coeff, std::abs(w[k]));
    if (static_cast<int>(k) <= t.res.m) t.residual = std::max(t.residual, std::abs(w[k]));
  }
  if (!t.res.infinite && static_cast<std::size_t>(t.res.m + 1) < w.size())
    t.next_coeff = std::abs(w[static_cast<std::size_t>(t.res.m + 1)]);
  return t;
}

inline ExperimentResult run_compression_table(const Json& c) {
  ExperimentResult r;
  CounterRng rng(c["seed"].get<std::uint64_t>(), "compression-table");
  int n = c["random_samples"].get<int>();
  double range = c["range"].get<double>(), tol = c["tol"].get<double>();
  std::vector<TableRow> rows;
  rows.push_back(compression_row("t I_-", MatrixPoly::from_terms({minus_identity()})));
  rows.push_back(compression_row("worst", MatrixPoly::from_terms({sym2(0, 1, 0), sym2(0, 0, 1)})));
  std::size_t tried = 0;
  for (std::uint64_t i = 0; static_cast<int>(rows.size()) < n + 2; ++i) {
    ++tried;
    auto B = random_sym(rng, i, 0, range), C = random_sym(rng, i, 3, range);
    if (!open_condition(B, C).holds) continue;
    rows.push_back(compression_row("open-" + std::to_string(rows.size() - 2),
                                   MatrixPoly::from_terms({minus_identity(), B, C})));
    if (tried > 1000000) throw std::runtime_error("compression-table: open condition too rare");
  }
  r.columns = {"name", "m", "m_star", "W11", "W12", "W21", "W22", "residual_through_m", "next_coeff"};
  double worst_res = 0;
  std::size_t not_two = 0;
  for (const auto& t : rows) {
    Json m = t.res.infinite ? Json("inf") : Json(t.res.m);
    Json ms = t.res.m_star_infinite ? Json("inf") : Json(t.res.m_star);
    const auto& W = t.res.witness;
    r.rows.push_back({t.name, m, ms, W(0, 0), W(0, 1), W(1, 0), W(1, 1), t.residual, t.next_coeff});
    worst_res = std::max(worst_res, t.residual);
    if (t.name.rfind("open-", 0) == 0 && (t.res.infinite || t.res.m != 2)) ++not_two;
  }
  const auto& w = rows[1];
  Eigen::Matrix2d Wexp;
  Wexp << -1, 0, 0, 0;
  double werr = (w.res.witness - Wexp).cwiseAbs().maxCoeff();
  r.summary = Json{{"random_samples", n}, {"max_residual", worst_res}, {"worst_witness_error", werr}};
  r.verdict("tI-minus", "m(t I_-) = 1", !rows[0].res.infinite && rows[0].res.m == 1, rows[0].res.m, 1);
  r.verdict("worst-infinite", "m(worst) = inf with det(W - A(t)) identically zero",
            w.res.infinite && w.max_coeff <= tol, w.max_coeff, tol);
  r.verdict("worst-witness", "witness W = [[-1,0],[0,0]]", werr <= 1e-9, werr, 1e-9);
  r.verdict("open-condition-m2", "m(t I_- + t^2 B + t^3 C) = 2 under the open condition", not_two == 0,
            static_cast<double>(not_two), 0.0);
  r.verdict("back-substitution", "witness coefficients vanish through order m", worst_res <= tol, worst_res, tol);
  return r;
}

// A(t0 + t) - A(t0) of a model phase, from its Hessian series.
inline MatrixPoly shifted_model(const PhaseFunction& ph, double t0) {
  int D = ph.model->degree();
  auto H = ph.hessian_series(t0, {0.0, 0.0}, D);
  MatrixPoly B;
  B.a.assign(H.begin(), H.end());
  B.a[0].setZero();
  return B;
}

inline ExperimentResult run_contact_order(const Json& c) {
  ExperimentResult r;
  double t0 = c["t0"].get<double>();
  Vec2d xi0 = vec2_from_json(c["xi0"]);
  std::vector<std::string> phases;
  if (c.contains("phases"))
    for (const auto& p : c["phases"]) phases.push_back(p.get<std::string>());
  else
    phases.push_back(c["phase"].get<std::string>());
  std::vector<int> ks;
  if (c.contains("k_list"))
    for (const auto& k : c["k_list"]) ks.push_back(k.get<int>());
  else
    ks.push_back(c["k"].get<int>());
  r.columns = {"phase", "k", "rank", "sv1", "sv2", "sv3", "sv4", "first_row_residual", "first_row_in_span",
               "m_star", "d1", "d1_expected"};
  bool worst_ok = true, span_ok = true;
  double d1_err = 0;
  for (const auto& label : phases) {
    PhaseFunction ph = phase_by_label(label);
    std::optional<CompressionResult> cr;
    std::vector<double> detc;
    if (ph.model) {
      MatrixPoly B = shifted_model(ph, t0);
      cr = compression_order(B);
      detc = B.det_coeffs();
    }
    for (int k : ks) {
      ContactOrderReport rep = contact_order(ph, t0, xi0, k);
      Eigen::VectorXd sv = Eigen::VectorXd::Zero(4);
      for (int i = 0; i < std::min<int>(4, static_cast<int>(rep.singular_values.size())); ++i) sv(i) = rep.singular_values(i);
      double d1 = rep.matrix(0, 0);
      double d1e = detc.size() > 1 ? detc[1] : 0.0;
      d1_err = std::max(d1_err, std::abs(d1 - d1e));
      Json ms = "";
      if (cr) {
        ms = cr->m_star_infinite ? Json("inf") : Json(cr->m_star);
        bool expect_in_span = cr->m_star_infinite || cr->m_star >= k;
        if (expect_in_span != rep.first_row_in_span) span_ok = false;
      }
      if (label == "worst" && rep.rank >= 4) worst_ok = false;
      r.rows.push_back({label, k, rep.rank, sv(0), sv(1), sv(2), sv(3), rep.first_row_residual, rep.first_row_in_span,
                        ms, d1, d1e});
    }
  }
  r.summary = Json{{"t0", t0}, {"max_d1_error", d1_err}};
  if (std::find(phases.begin(), phases.end(), "worst") != phases.end())
    r.verdict("worst-rank-deficient", "worst phase contact matrix has rank < 4 for every k", worst_ok, worst_ok, 1);
  r.verdict("span-vs-mstar", "first row in span of D rows through k iff m*(A) >= k", span_ok, span_ok, 1);
  r.verdict("first-entry", "first entry equals d/dt det(A(t0+t) - A(t0)) at 0", d1_err <= 1e-10, d1_err, 1e-10);
  return r;
}

inline ExperimentResult run_hairbrush_conditions(const Json& c) {
  ExperimentResult r;
  Eigen::Matrix2d B = sym_from_json(c["B"]), C = sym_from_json(c["C"]);
  OpenCondition oc = open_condition(B, C);
  PhaseFunction ph = model_phase(MatrixPoly::from_terms({minus_identity(), B, C}), "model");
  double ratio = c["sigma_ratio"].get<double>();
  int grid = c["grid"].get<int>(), n_t = c["n_t"].get<int>();
  std::vector<double> taus = number_list(c["taus"]);
  r.columns = {"tau", "sigma", "points", "min_abs_cone_det", "cone_over_tau2", "min_abs_det_M", "det_M_over_tau4"};
  double min_c = std::numeric_limits<double>::infinity(), max_c = 0, min_m = min_c, max_m = 0;
  for (double tau : taus) {
    HairbrushParams hp;
    hp.xi0 = vec2_from_json(c["xi0"]);
    hp.tau = tau;
    hp.sigma = ratio * tau;
    hp.c1 = ratio;
    CurveFamily F = hairbrush_family(ph, hp);
    auto reps = classify_grid(F, grid, n_t, resolved_workers(c));
    RegionSummary s = summarize(reps);
    double cn = s.min_abs_cone_det / (tau * tau), mn = s.min_abs_det_M / std::pow(tau, 4);
    min_c = std::min(min_c, cn), max_c = std::max(max_c, cn);
    min_m = std::min(min_m, mn), max_m = std::max(max_m, mn);
    r.rows.push_back({tau, hp.sigma, s.points, s.min_abs_cone_det, cn, s.min_abs_det_M, mn});
  }
  Series sc{"cone_over_tau2", {}}, sm{"det_M_over_tau4", {}};
  for (const auto& row : r.rows) {
    sc.points.push_back({row[0].get<double>(), row[4].get<double>()});
    sm.points.push_back({row[0].get<double>(), row[6].get<double>()});
  }
  r.series = {sc, sm};
  double cf = c["cone_floor"].get<double>(), tf = c["twist_floor"].get<double>(), u = c["uniformity"].get<double>();
  r.summary = Json{{"open_margin", oc.margin},     {"cone_floor_measured", min_c}, {"twist_floor_measured", min_m},
                   {"cone_spread", min_c / max_c}, {"twist_spread", min_m / max_m}};
  r.verdict("open-condition", "model (B, C) passes the open condition", oc.holds, oc.margin, 0.0);
  r.verdict("coniness-floor", "min |cone_det| / tau^2 above floor for every tau", min_c >= cf, min_c, cf);
  r.verdict("twist-floor", "min |det M| / tau^4 above floor for every tau", min_m >= tf, min_m, tf);
  r.verdict("coniness-uniform", "min/max over tau of |cone_det| / tau^2", min_c / max_c >= u, min_c / max_c, u);
  r.verdict("twist-uniform", "min/max over tau of |det M| / tau^4", min_m / max_m >= u, min_m / max_m, u);
  return r;
}

struct TriplePick {
  bool ok = false;
  TransversalitySample s;
};

inline TriplePick transversality_triple(const CurveFamily& F, const CounterRng& rng, std::uint64_t i, double r,
                                        double K) {
  for (std::uint64_t a = 0; a < 64; ++a) {
    std::uint64_t k = i * 64 + a;
    auto g = sample_admissible(F, rng, k, 0.2);
    if (!g) continue;
    double g1 = rng.uniform(k, 10, r / K, r / 2), g2 = rng.uniform(k, 11, r / K, r / 2);
    std::array<double, 3> th{g->theta, g->theta + g1, g->theta + g1 + g2};
    bool ok = true;
    for (double t : th)
      if (!F.param_box[2].contains(t)) ok = false;
    if (!ok) continue;
    try {
      for (int j = 1; j < 3; ++j) {
        Vec2d q = solve_hat_p(F, {g->p1, g->p2}, g->theta, g->t, th[static_cast<std::size_t>(j)]);
        if (!F.in_domain(q[0], q[1], th[static_cast<std::size_t>(j)], g->t)) ok = false;
      }
      if (!ok) continue;
      if (classify_point(F, g->p1, g->p2, g->theta, g->t).coniness != Coniness::Coney)
        throw DomainError("transversality: family is not coney at a sampled point");
      return {true, transversality_sample(F, {g->p1, g->p2}, g->theta, g->t, th, r, K)};
    } catch (const SingularInput&) {
      continue;
    } catch (const ConvergenceError&) {
      continue;
    }
  }
  return {};
}

inline ExperimentResult run_transversality(const Json& c) {
  ExperimentResult r;
  CurveFamily F = family_by_label(c["family"].get<std::string>());
  CounterRng rng(c["seed"].get<std::uint64_t>(), "transversality");
  double K = c["K"].get<double>(), fl = c["ratio_floor"].get<double>();
  int n = c["triples"].get<int>();
  if (K < 2.0) throw ConfigError("transversality: K must be at least 2");
  r.columns = {"r", "triples", "min_ratio", "median_ratio", "max_ratio", "min_cone"};
  double worst = std::numeric_limits<double>::infinity();
  std::uint64_t base = 0;
  for (double rr : number_list(c["r_list"])) {
    auto picks = parallel_map<TriplePick>(static_cast<std::size_t>(n), resolved_workers(c), [&](std::size_t i) {
      return transversality_triple(F, rng, base + i, rr, K);
    });
    base += static_cast<std::uint64_t>(n);
    std::vector<double> ratios;
    double min_cone = std::numeric_limits<double>::infinity();
    for (const auto& p : picks)
      if (p.ok) {
        ratios.push_back(p.s.ratio);
        min_cone = std::min(min_cone, p.s.min_cone);
      }
    if (ratios.size() != static_cast<std::size_t>(n)) throw std::runtime_error("transversality: sampling failed");
    std::sort(ratios.begin(), ratios.end());
    worst = std::min(worst, ratios.front());
    r.rows.push_back({rr, n, ratios.front(), ratios[ratios.size() / 2], ratios.back(), min_cone});
  }
  r.summary = Json{{"family", F.label}, {"K", K}, {"min_ratio", num(worst)}};
  r.verdict("transverse", "|det(n1,n2,n3)| >= floor * c (r/K)^3 for every triple", worst >= fl, worst, fl);
  return r;
}

inline VRule vrule_from(const std::string& s) {
  if (s == "fixed") return VRule::Fixed;
  if (s == "random") return VRule::Random;
  if (s == "witness") return VRule::Witness;
  throw ConfigError("unknown v_rule: " + s);
}

inline ExperimentResult run_kakeya_probe(const Json& c) {
  ExperimentResult r;
  PhaseFunction ph = phase_by_label(c["phase"].get<std::string>());
  SampleOptions o;
  o.fraction = c["fraction"].get<double>();
  o.v_rule = vrule_from(c["v_rule"].get<std::string>());
  o.v_radius = c["v_radius"].get<double>();
  o.seed = c["seed"].get<std::uint64_t>();
  o.t_range = {c["t_lo"].get<double>(), c["t_hi"].get<double>()};
  o.max_curves = c["max_curves"].get<std::size_t>();
  o.min_delta = c["min_delta"].get<double>();
  if (o.v_rule == VRule::Witness) {
    if (!ph.model) throw ConfigError("witness v_rule needs a model phase");
    o.omega = compression_order(*ph.model).witness;
  }
  int workers = resolved_workers(c);
  double Cd = c["C"].get<double>(), Cb = c["ball_C"].get<double>();
  std::vector<std::pair<double, double>> fit_pts;
  struct Probe {
    double delta, lambda_min, measure, sigma;
    std::size_t n, mu, bush, hair;
    bool ball;
  };
  std::vector<Probe> probes;
  for (double delta : number_list(c["delta_list"])) {
    CurveSet L = direction_separated_sample(ph, delta, o);
    if (L.size() == 0) throw std::runtime_error("kakeya-probe: empty sample");
    auto Y = shade_all(L, ShadeMode::Dilated, workers);
    auto xi = L.directions();
    Probe p{};
    p.delta = delta;
    p.n = L.size();
    p.lambda_min = std::numeric_limits<double>::infinity();
    for (const auto& y : Y) p.lambda_min = std::min(p.lambda_min, lambda_density(y));
    p.measure = union_measure(Y);
    auto D = multiplicity_dichotomy(Y, xi, delta, Cd);
    p.mu = static_cast<std::size_t>(D.mu);
    p.sigma = D.sigma;
    IncidenceIndex idx = build_incidence(Y);
    p.bush = idx.max_multiplicity() > 1 ? extract_bush(idx, delta).members.size() : 1;
    p.hair = D.high.empty() ? 0 : extract_hairbrush(Y, xi, idx, D.high.front(), D.sigma).members.size();
    std::vector<Vec3d> pts;
    for (const auto& v : xi) pts.push_back({v[0], v[1], 0.0});
    p.ball = ball_condition_check(pts, delta, Cb).holds;
    probes.push_back(p);
    fit_pts.push_back({delta, p.measure});
  }
  std::optional<ExponentFit> fit;
  if (fit_pts.size() >= 3) fit = exponent_fit(fit_pts);
  r.columns = {"delta", "num_curves", "lambda_min", "measure", "multiplicity_mu", "sigma", "bush_size",
               "hairbrush_size", "exponent_fit"};
  bool ball_ok = true;
  for (const auto& p : probes) {
    ball_ok = ball_ok && p.ball;
    r.rows.push_back({p.delta, p.n, p.lambda_min, p.measure, p.mu, p.sigma, p.bush, p.hair,
                      fit ? Json(fit->slope) : Json("")});
  }
  Series s{"log2_measure_vs_log2_delta", fit ? fit->log_points : std::vector<std::pair<double, double>>{}};
  r.series.push_back(s);
  r.summary = Json{{"phase", ph.label}};
  r.verdict("ball-condition", "directions satisfy #(L cap B) <= C (r/delta)^2", ball_ok, ball_ok, 1);
  if (fit) {
    r.summary["slope"] = fit->slope;
    r.summary["stderr"] = fit->stderr_slope;
    double lo = c["exponent_lo"].get<double>(), hi = c["exponent_hi"].get<double>();
    r.verdict("exponent-band", "fitted volume exponent within the sanity band", fit->slope >= lo && fit->slope <= hi,
              fit->slope, hi);
  }
  return r;
}

inline MatrixPoly scaling_case(const Json& c) {
  std::string k = c["case"].get<std::string>();
  if (k == "model") return default_model_poly();
  if (k == "worst") return MatrixPoly::from_terms({sym2(0, 1, 0), sym2(0, 0, 1)});
  if (k == "straight") return MatrixPoly::from_terms({minus_identity()});
  if (k == "custom") return matrix_poly_from_json(c["matrix_poly"]);
  throw ConfigError("unknown case: " + k);
}

inline ExperimentResult run_compression_scaling(const Json& c) {
  ExperimentResult r;
  MatrixPoly A = scaling_case(c);
  CompressionResult cr = compression_order(A);
  double tol = c["tolerance"].get<double>();
  double expected = c["expected_exponent"].get<double>();
  if (expected < 0) expected = cr.infinite ? 1.0 : 1.0 + 1.0 / (cr.m + 1);
  std::vector<double> deltas = number_list(c["delta_list"]);
  auto sets = parallel_map<WitnessSet>(deltas.size(), resolved_workers(c), [&](std::size_t i) {
    return compression_witness_set(A, cr.witness, deltas[i], cr.m, cr.infinite);
  });
  r.columns = {"delta", "cells", "measure", "t_max", "min_curve_density"};
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const auto& w = sets[i];
    r.rows.push_back({deltas[i], w.cells.size(), w.cells.measure(), w.t_max, w.min_curve_density});
    pts.push_back({deltas[i], w.cells.measure()});
  }
  r.summary = Json{{"m", cr.infinite ? Json("inf") : Json(cr.m)}, {"expected_exponent", expected}};
  if (pts.size() >= 3) {
    ExponentFit f = exponent_fit(pts);
    r.summary["slope"] = f.slope;
    r.summary["stderr"] = f.stderr_slope;
    r.summary["r2"] = f.r2;
    r.summary["box_dimension"] = 3.0 - f.slope;
    r.series.push_back({"log2_measure_vs_log2_delta", f.log_points});
    r.verdict("volume-exponent", "|slope - expected| <= tolerance", std::abs(f.slope - expected) <= tol, f.slope,
              expected);
  }
  return r;
}

inline ExperimentResult run_compress(const Json& c) {
  ExperimentResult r;
  MatrixPoly A = matrix_poly_from_json(c["matrix_poly"]);
  int mmax = c["m_max"].get<int>();
  CompressionResult cr = compression_order(A, mmax);
  r.columns = {"order", "witness_coeff", "system_consistent"};
  for (std::size_t k = 0; k < cr.witness_coeffs.size(); ++k) {
    bool cons = k == 0 ? true : solve_affine(compression_system(A, static_cast<int>(k))).consistent;
    r.rows.push_back({k, cr.witness_coeffs[k], cons});
  }
  const auto& W = cr.witness;
  r.summary = Json{{"m", cr.infinite ? Json("inf") : Json(cr.m)},
                   {"capped", cr.capped},
                   {"m_star", cr.m_star_infinite ? Json("inf") : Json(cr.m_star)},
                   {"witness", Json::array({W(0, 0), W(0, 1), W(1, 0), W(1, 1)})},
                   {"lambda", Json::array({cr.lambda(0), cr.lambda(2), cr.lambda(1)})}};
  double res = 0;
  for (int k = 0; k <= std::min<int>(cr.m, static_cast<int>(cr.witness_coeffs.size()) - 1); ++k)
    res = std::max(res, std::abs(cr.witness_coeffs[static_cast<std::size_t>(k)]));
  r.verdict("back-substitution", "witness coefficients vanish through order m", res <= 1e-9, res, 1e-9);
  r.verdict("m-le-mstar", "m <= m*", cr.m_star_infinite || (!cr.infinite && cr.m <= cr.m_star), cr.m, cr.m_star);
  return r;
}

inline ExperimentResult run_contact_single(const Json& c) {
  ExperimentResult r;
  PhaseFunction ph = phase_by_label(c["phase"].get<std::string>());
  int k = c["k"].get<int>();
  ContactOrderReport rep = contact_order(ph, c["t0"].get<double>(), vec2_from_json(c["xi0"]), k);
  r.columns = {"j", "det_D", "D11", "D12", "D22"};
  for (int j = 0; j < k; ++j)
    r.rows.push_back({j + 1, rep.matrix(0, j), rep.matrix(1, j), rep.matrix(2, j), rep.matrix(3, j)});
  Json sv = Json::array();
  for (int i = 0; i < rep.singular_values.size(); ++i) sv.push_back(rep.singular_values(i));
  r.summary = Json{{"phase", ph.label},
                   {"k", k},
                   {"rank", rep.rank},
                   {"singular_values", sv},
                   {"first_row_residual", rep.first_row_residual},
                   {"contact_order_le_k", rep.full_rank}};
  return r;
}

inline std::vector<ExperimentSpec> experiment_registry() {
  std::vector<ExperimentSpec> v;
  Json delta6 = Json::array({0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125});
  v.push_back({"classify-grid", "pointwise classification over a parameter grid",
               with_common({{"family", "straight-hairbrush"},
                            {"grid", 17},
                            {"n_t", 5},
                            {"cone_tol", 1e-9},
                            {"rank_tol", 1e-7},
                            {"floor", 1e-8},
                            {"per_point", true},
                            {"point", Json::array()},
                            {"expect_coniness", ""},
                            {"expect_flatness", ""}}),
               run_classify_grid});
  v.push_back({"classify", "classification at one point or over a grid (region summary)",
               with_common({{"family", "straight-hairbrush"},
                            {"grid", 9},
                            {"n_t", 5},
                            {"cone_tol", 1e-9},
                            {"rank_tol", 1e-7},
                            {"floor", 1e-8},
                            {"per_point", false},
                            {"point", Json::array()},
                            {"expect_coniness", ""},
                            {"expect_flatness", ""}}),
               run_classify_grid});
  v.push_back({"listing2-check", "worst-case hairbrush: zero cone determinant and rank-one tangency matrix",
               with_common({{"points", 500}, {"tol", 1e-9}}), run_listing2});
  v.push_back({"listing3-check", "quadratic hairbrush limits at (t, theta) -> (0, 0)",
               with_common({{"samples", 50}, {"scale", 1e-4}, {"b_range", 1.0}, {"tol", 1e-3}}), run_listing3});
  v.push_back({"open-condition-scan", "open condition margin against definiteness of Q",
               with_common({{"samples", 1000}, {"range", 1.0}, {"iplus_samples", 50}}), run_open_condition_scan});
  v.push_back({"compression-table", "compression orders of the standard matrix polynomials",
               with_common({{"random_samples", 100}, {"range", 1.0}, {"tol", 1e-9}}), run_compression_table});
  v.push_back({"contact-order-scan", "contact-order matrices against m*",
               with_common({{"phases", Json::array({"worst", "model", "hyperbolic", "tan"})},
                            {"k_list", Json::array({4, 5, 6, 7, 8})},
                            {"t0", 0.0},
                            {"xi0", Json::array({0.3, 0.2})}}),
               run_contact_order});
  v.push_back({"contact-order", "contact-order matrix of one phase",
               with_common({{"phase", "model"}, {"k", 6}, {"t0", 0.0}, {"xi0", Json::array({0.3, 0.2})}}),
               run_contact_single});
  v.push_back({"hairbrush-conditions", "coniness and twistiness floors of model hairbrushes across tau",
               with_common({{"B", Json::array({0.05, 0.025, -0.025})},
                            {"C", Json::array({0.005, 0.075, -0.0025})},
                            {"xi0", Json::array({0.2, -0.1})},
                            {"taus", Json::array({1.0, 0.5, 0.25, 0.125})},
                            {"sigma_ratio", 0.1},
                            {"grid", 9},
                            {"n_t", 5},
                            {"cone_floor", 1e-3},
                            {"twist_floor", 1e-4},
                            {"uniformity", 0.25}}),
               run_hairbrush_conditions});
  v.push_back({"transversality", "normals of three curves through a point",
               with_common({{"family", "quadratic-hairbrush"},
                            {"K", 3.0},
                            {"r_list", Json::array({0.125, 0.0625, 0.03125})},
                            {"triples", 1000},
                            {"ratio_floor", 0.1}}),
               run_transversality});
  v.push_back({"kakeya-probe", "union measure, multiplicity, bush and hairbrush sizes across delta",
               with_common({{"phase", "parabolic"},
                            {"delta_list", Json::array({0.125, 0.0625, 0.03125, 0.015625})},
                            {"fraction", 0.25},
                            {"v_rule", "random"},
                            {"v_radius", 0.5},
                            {"t_lo", 0.0},
                            {"t_hi", 1.0},
                            {"C", 8.0},
                            {"ball_C", 4.0},
                            {"max_curves", 100000},
                            {"min_delta", 0.001953125},
                            {"exponent_lo", 0.0},
                            {"exponent_hi", 1.0}}),
               run_kakeya_probe});
  Json scaling = {{"case", "model"},
                  {"matrix_poly", matrix_poly_to_json(default_model_poly())},
                  {"delta_list", delta6},
                  {"tolerance", 0.15},
                  {"expected_exponent", -1.0}};
  v.push_back({"compression-scaling", "volume of the compressed witness set across delta", with_common(scaling),
               run_compression_scaling});
  Json witness = scaling;
  witness["case"] = "custom";
  v.push_back({"compression-witness", "witness set of a given matrix polynomial", with_common(witness),
               run_compression_scaling});
  v.push_back({"compress", "compression order of a matrix polynomial",
               with_common({{"matrix_poly", matrix_poly_to_json(default_model_poly())}, {"m_max", -1}}), run_compress});
  return v;
}

inline const ExperimentSpec& find_experiment(const std::string& name) {
  static const std::vector<ExperimentSpec> reg = experiment_registry();
  for (const auto& e : reg)
    if (e.name == name) return e;
  throw ConfigError("unknown experiment: " + name);
}

inline Json resolve_config(const std::string& name, const Json& user) {
  const ExperimentSpec& e = find_experiment(name);
  Json u = user;
  if (u.contains("experiment")) {
    if (!u["experiment"].is_string()) throw ConfigError("experiment must be a string");
    std::string n = u["experiment"];
    if (!n.empty() && n != name) throw ConfigError("config is for experiment " + n + ", not " + name);
  }
  Json c = apply_schema(e.schema, u);
  c["experiment"] = name;
  return c;
}

inline ExperimentResult run_experiment(const Json& config) {
  std::string name = config.at("experiment").get<std::string>();
  const ExperimentSpec& e = find_experiment(name);
  auto t0 = std::chrono::steady_clock::now();
  ExperimentResult r = e.run(config);
  r.experiment = name;
  r.config = config;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace kakeya
