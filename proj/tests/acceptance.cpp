// Acceptance checks 1..11. `acceptance` runs all of them; `acceptance N` runs one.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "kakeya/experiments.hpp"

using namespace kakeya;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string g(double x) {
  char b[48];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

ExperimentResult run_named(const std::string& name, Json user = Json::object()) {
  return run_experiment(resolve_config(name, user));
}

Outcome verdicts_of(const ExperimentResult& r) {
  Outcome o;
  for (const auto& v : r.verdicts) {
    if (!v.pass) o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + v.name + "=" + g(v.measured) + (v.pass ? "" : " (FAIL)");
  }
  return o;
}

void time_limit(Outcome& o, double secs, double limit) {
  o.detail += "; " + g(secs) + " s (limit " + g(limit) + " s)";
  if (secs > limit) o.pass = false;
}

double rel(const Vec2d& a, const Vec2d& b) {
  double n = std::max(norm2(b), 1e-12);
  return std::hypot(a[0] - b[0], a[1] - b[1]) / n;
}

// 1. Worst-case hairbrush: vanishing cone determinant, rank-one tangency matrix.
Outcome c1() {
  auto t0 = Clock::now();
  auto r = run_named("listing2-check");
  Outcome o = verdicts_of(r);
  o.pass = o.pass && r.rows.size() == 500;
  time_limit(o, since(t0), 5.0);
  return o;
}

// 2. Quadratic hairbrush limits at the origin.
Outcome c2() {
  auto t0 = Clock::now();
  auto r = run_named("listing3-check");
  Outcome o = verdicts_of(r);
  o.pass = o.pass && r.rows.size() == 50;
  time_limit(o, since(t0), 10.0);
  return o;
}

// 3. Straight hairbrush is planey and flat1; gamma = xi / (theta - t).
Outcome c3() {
  CurveFamily F = straight_hairbrush();
  auto reps = classify_grid(F, 17, 5, default_workers());
  RegionSummary s = summarize(reps);
  double gerr = 0.0;
  for (const auto& p : reps) {
    Vec2d e{p.p1 / (p.theta - p.t), p.p2 / (p.theta - p.t)};
    gerr = std::max(gerr, std::hypot(p.spread.omega_dot[0] - e[0], p.spread.omega_dot[1] - e[1]));
  }
  Outcome o;
  o.pass = s.points > 0 && s.coniness_label() == "planey" && s.flatness_label() == "flat1" &&
           s.max_abs_cone_det <= 1e-9 && gerr <= 1e-10;
  o.detail = std::to_string(s.points) + " points, " + s.coniness_label() + "/" + s.flatness_label() +
             ", max|cone|=" + g(s.max_abs_cone_det) + ", gamma err=" + g(gerr);
  return o;
}

// Closed-form spread direction where one exists for the family.
std::optional<Vec2d> gamma_oracle(const std::string& label, const GridPoint& q) {
  Vec2d xi{q.p1, q.p2};
  if (label == "straight-hairbrush") return Vec2d{xi[0] / (q.theta - q.t), xi[1] / (q.theta - q.t)};
  HairbrushParams unit;
  unit.tau = unit.sigma = 1.0;
  unit.enforce_sigma = false;
  if (label == "worst-hairbrush") return hairbrush_gamma_oracle(worst_phase(), unit, xi, q.theta, q.t);
  if (label == "quadratic-hairbrush")
    return hairbrush_gamma_oracle(model_phase(MatrixPoly::from_terms({minus_identity(), default_model_B()})), unit, xi,
                                  q.theta, q.t);
  const std::string prefix = "hairbrush:";
  if (label.rfind(prefix, 0) == 0) {
    std::string ph = label.substr(prefix.size());
    return hairbrush_gamma_oracle(phase_by_label(ph), default_hairbrush_params(ph), xi, q.theta, q.t);
  }
  return std::nullopt;
}

// 4. Jets vs Newton + finite differences vs closed-form gamma, 500 points per family.
Outcome c4() {
  Outcome o;
  double worst_fd = 0, worst_or = 0;
  std::size_t oracle_pts = 0;
  for (const auto& label : builtin_family_labels()) {
    CurveFamily F = family_by_label(label);
    CounterRng rng(7, "oracle-" + label);
    struct E {
      double fd, orc;
      bool has;
    };
    auto errs = parallel_map<E>(500, default_workers(), [&](std::size_t i) {
      auto q = sample_admissible(F, rng, i, 0.05);
      if (!q) throw std::runtime_error("no admissible point for " + label);
      SpreadDerivatives s = spread_derivatives(F, q->p1, q->p2, q->theta, q->t);
      FdSpread f = spread_derivatives_fd(F, q->p1, q->p2, q->theta, q->t);
      // omega'' vanishes identically on planey families, so both derivatives share the scale of the larger one.
      double scale = std::max({norm2(s.omega_dot), norm2(s.omega_ddot), 1e-300});
      double fd = std::max(std::hypot(s.omega_dot[0] - f.omega_dot[0], s.omega_dot[1] - f.omega_dot[1]),
                           std::hypot(s.omega_ddot[0] - f.omega_ddot[0], s.omega_ddot[1] - f.omega_ddot[1])) /
                  scale;
      E e{fd, 0.0, false};
      if (auto go = gamma_oracle(label, *q)) {
        e.orc = rel(s.omega_dot, *go);
        e.has = true;
      }
      return e;
    });
    double fdl = 0, orl = 0;
    for (const auto& e : errs) {
      fdl = std::max(fdl, e.fd);
      if (e.has) orl = std::max(orl, e.orc), ++oracle_pts;
    }
    worst_fd = std::max(worst_fd, fdl);
    worst_or = std::max(worst_or, orl);
    if (fdl > 1e-4 || orl > 1e-4) {
      o.pass = false;
      o.detail += label + " fd=" + g(fdl) + " oracle=" + g(orl) + "; ";
    }
  }
  o.detail += "max rel err jets/fd " + g(worst_fd) + ", jets/closed form " + g(worst_or) + " over " +
              std::to_string(oracle_pts) + " oracle points";
  return o;
}

// 5. cone_det ~ sigma^-2 tau^3 and det M ~ tau^4 sigma^-4 against the unscaled hairbrush.
Outcome c5() {
  PhaseFunction ph = phase_by_label("model");
  HairbrushParams base = default_hairbrush_params("model");
  base.tau = base.sigma = 1.0;
  base.enforce_sigma = false;
  CurveFamily F1 = hairbrush_family(ph, base);
  CounterRng rng(11, "scaling");
  double worst_c = 0, worst_m = 0;
  const double vals[3] = {1.0, 0.5, 0.25};
  for (double tau : vals)
    for (double sigma : vals) {
      HairbrushParams hp = base;
      hp.tau = tau;
      hp.sigma = sigma;
      CurveFamily F = hairbrush_family(ph, hp);
      for (std::uint64_t i = 0; i < 20; ++i) {
        Vec2d p = annulus_sample(rng, i, 0);
        double th = rng.uniform(i, 2, -0.5, 0.5);
        double t = th + (rng.uniform(i, 3) < 0.5 ? -1 : 1) * rng.uniform(i, 4, 0.4, 0.9);
        PointReport a = classify_point(F, p[0], p[1], th, t);
        PointReport b = classify_point(F1, sigma * p[0], sigma * p[1], tau * th, tau * t);
        double ec = std::pow(tau, 3) / (sigma * sigma) * b.cone_det;
        double em = std::pow(tau, 4) / std::pow(sigma, 4) * b.det_M;
        worst_c = std::max(worst_c, std::abs(a.cone_det - ec) / std::abs(ec));
        worst_m = std::max(worst_m, std::abs(a.det_M - em) / std::abs(em));
      }
    }
  Outcome o;
  o.pass = worst_c <= 1e-6 && worst_m <= 1e-6;
  o.detail = "max rel err cone " + g(worst_c) + ", det M " + g(worst_m) + " over tau, sigma in {1, 1/2, 1/4}";
  return o;
}

// 6. Coniness and twistiness floors of model hairbrushes across tau.
Outcome c6() { return verdicts_of(run_named("hairbrush-conditions")); }

// 7. Compression table.
Outcome c7() {
  auto t0 = Clock::now();
  auto r = run_named("compression-table");
  Outcome o = verdicts_of(r);
  o.pass = o.pass && r.rows.size() == 102;
  time_limit(o, since(t0), 30.0);
  return o;
}

// 8. Volume scaling of the compressed witness sets: 1 + 1/3 for m = 2, 2 for the worst case.
Outcome c8() {
  auto t0 = Clock::now();
  Json deltas = expand_list("2^-4..2^-9");
  auto model = run_named("compression-scaling", {{"case", "model"}, {"delta_list", deltas}, {"expected_exponent", 4.0 / 3.0}});
  auto worst = run_named("compression-scaling", {{"case", "worst"}, {"delta_list", deltas}, {"expected_exponent", 2.0}});
  double sm = model.summary["slope"], sw = worst.summary["slope"];
  Outcome o;
  bool pm = std::abs(sm - 4.0 / 3.0) <= 0.15, pw = std::abs(sw - 2.0) <= 0.15;
  o.pass = pm && pw && model.summary["m"] == 2 && worst.summary["m"] == "inf";
  o.detail = "m=2 slope " + g(sm) + (pm ? "" : " (FAIL)") + " vs 1.333; worst slope " + g(sw) +
             (pw ? "" : " (FAIL)") + " vs 2 (box dimension " + g(3.0 - sw) + ")";
  time_limit(o, since(t0), 300.0);
  return o;
}

// 9. Transversality of three curves through a point in a coney family.
Outcome c9() {
  auto t0 = Clock::now();
  RegionSummary s = summarize(classify_grid(family_by_label("quadratic-hairbrush"), 9, 3, default_workers()));
  auto r = run_named("transversality");
  Outcome o = verdicts_of(r);
  o.pass = o.pass && s.coniness_label() == "coney";
  o.detail = "family " + s.coniness_label() + "; " + o.detail;
  time_limit(o, since(t0), 30.0);
  return o;
}

// 10. Discrete machinery property checks at delta = 2^-4 and 2^-6.
Outcome c10() {
  auto t0 = Clock::now();
  Outcome o;
  auto fail = [&](const std::string& what) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + what;
  };
  PhaseFunction ph = phase_by_label("parabolic");
  PhaseFunction model = phase_by_label("model");
  for (double delta : {0.0625, 0.015625}) {
    std::string at = " at delta " + g(delta);

    // Voxelization sandwich.
    PhaseCurve c{{0.6, -0.3}, {0.1, 0.2}};
    CurvePath x = [&](double t) { return phase_curve_point(ph, c, t); };
    VoxelSet cl = shade_path(x, {{0.0, 1.0}}, delta, ShadeMode::Centerline);
    VoxelSet dl = shade_path(x, {{0.0, 1.0}}, delta, ShadeMode::Dilated);
    if (set_intersection(cl, dl).size() != cl.size()) fail("centerline not inside dilated shading" + at);
    CounterRng rng(3, "sandwich");
    for (std::uint64_t i = 0; i < 2000; ++i) {
      double t = rng.uniform(i, 0, 0.0, 1.0);
      Vec2d p = x(t);
      double dx = rng.uniform(i, 1, -0.5, 0.5) * delta, dy = rng.uniform(i, 2, -0.5, 0.5) * delta;
      double dt = rng.uniform(i, 3, -0.5, 0.5) * delta;
      if (t + dt < 0.0 || t + dt > 1.0) continue;
      if (!dl.contains(cell_of(p[0] + dx, p[1] + dy, t + dt, delta))) {
        fail("delta/2 neighbourhood escapes the shading" + at);
        break;
      }
    }
    std::vector<Vec3d> fine;
    for (int i = 0; i <= 20000; ++i) {
      double t = i / 20000.0;
      Vec2d p = x(t);
      fine.push_back({p[0], p[1], t});
    }
    double far = 0.0;
    for (auto k : dl.keys) {
      Vec3d cc = cell_center(k, delta);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& f : fine)
        best = std::min(best, std::max({std::abs(cc[0] - f[0]), std::abs(cc[1] - f[1]), std::abs(cc[2] - f[2])}));
      far = std::max(far, best);
    }
    if (far > 1.5 * delta + 2.0 / 20000) fail("shading cell " + g(far / delta) + " delta from the curve" + at);
    if (dl.size() > 27 * cl.size()) fail("dilated shading above 27x centerline" + at);

    // Regular refinement.
    std::vector<VoxelSet> inputs{dl};
    {
      std::vector<std::uint64_t> keys = cl.keys;
      Vec2d p = x(0.5);
      int bi = static_cast<int>(std::floor(p[0] / delta)), bj = static_cast<int>(std::floor(p[1] / delta));
      int bk = static_cast<int>(std::floor(0.5 / delta));
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
          for (int k = -2; k <= 2; ++k) keys.push_back(pack_cell(bi + a, bj + b, bk + k));
      inputs.push_back(VoxelSet::from_keys(delta, keys));
    }
    for (const auto& Y : inputs) {
      RegularRefinement R = regular_refinement(Y);
      if (R.retained_fraction < 0.5) fail("regular refinement kept " + g(R.retained_fraction) + at);
      if (regularity_margin(R.cells, 4.0) < 1.0) fail("refined shading not regular" + at);
      if (set_intersection(R.cells, Y).size() != R.cells.size()) fail("refinement not a subset" + at);
    }

    // Two-ends piece, brute force.
    {
      VoxelSet Y = cl;
      double eps0 = 0.1;
      TwoEndsPiece P = two_ends_piece(Y, eps0);
      std::vector<Vec3d> pts;
      for (auto k : Y.keys) pts.push_back(cell_center(k, delta));
      double best = 0.0;
      for (const auto& ctr : pts)
        for (double r = delta; r < 4.0; r *= 2.0) {
          std::size_t n = 0;
          for (const auto& q : pts)
            if (center_distance(ctr, q) <= r * (1 + 1e-12)) ++n;
          best = std::max(best, std::pow(r, -eps0) * static_cast<double>(n));
        }
      if (std::abs(best - P.score) > 1e-9 * best) fail("two-ends score differs from brute force" + at);
      std::vector<Vec3d> piece;
      for (auto k : P.cells.keys) piece.push_back(cell_center(k, delta));
      double viol = 0.0;
      for (const auto& ctr : piece)
        for (double r = delta; r < 4.0; r *= 2.0) {
          std::size_t n = 0;
          for (const auto& q : piece)
            if (center_distance(ctr, q) <= r * (1 + 1e-12)) ++n;
          viol = std::max(viol, static_cast<double>(n) / (std::pow(r / P.radius, eps0) * static_cast<double>(piece.size())));
        }
      if (viol > 1.0 + 1e-9) fail("two-ends piece violates the two-ends bound (" + g(viol) + ")" + at);
    }

    // Broad-narrow on constructed instances.
    {
      CounterRng br(5, "broad-narrow");
      std::vector<std::vector<double>> cases(4);
      for (std::uint64_t i = 0; i < 400; ++i) {
        cases[0].push_back(br.uniform(i, 0, -1.0, 1.0));
        cases[1].push_back(br.uniform(i, 1, 0.2, 0.6));
        cases[2].push_back(i % 2 ? br.uniform(i, 2, -1.0, 1.0) : br.uniform(i, 3, -0.2, 0.2));
        cases[3].push_back(-0.9 + 0.3 * static_cast<double>(i % 7));
      }
      for (const auto& th : cases) {
        BroadNarrowResult B;
        try {
          B = broad_narrow(th, delta);
        } catch (const NarrowDegenerate&) {
          fail("broad-narrow degenerate on a spread instance" + at);
          continue;
        }
        double frac = static_cast<double>(B.count_J) / static_cast<double>(B.count_total);
        if (frac < B.guarantee) fail("broad-narrow kept fraction " + g(frac) + at);
        double w = B.r / B.children;
        for (int a = 0; a < 3; ++a) {
          const auto& S = B.subsets[static_cast<std::size_t>(a)];
          if (static_cast<double>(S.size()) < B.split_fraction * static_cast<double>(B.count_J))
            fail("broad-narrow subset below (2|log delta|)^-1" + at);
        }
        // Children are pairwise non-adjacent: some full child lies between any two subsets.
        std::array<double, 3> lo, hi;
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::numeric_limits<double>::infinity(), hi[a] = -lo[a];
          for (int i : B.subsets[static_cast<std::size_t>(a)])
            lo[a] = std::min(lo[a], th[static_cast<std::size_t>(i)]), hi[a] = std::max(hi[a], th[static_cast<std::size_t>(i)]);
        }
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            if (a != b && hi[a] < lo[b] && lo[b] - hi[a] < w * (1 - 1e-9)) fail("broad-narrow subsets adjacent" + at);
      }
      std::vector<double> point(400, 0.123);
      try {
        broad_narrow(point, delta);
        fail("broad-narrow split a point mass" + at);
      } catch (const NarrowDegenerate&) {
      }
    }

    // Bush tubes are disjoint away from the centre.
    {
      std::vector<Vec2d> xis;
      for (int i = 0; i < 8; ++i) {
        double a = 2.0 * 3.14159265358979323846 * i / 8;
        xis.push_back({0.8 * std::cos(a), 0.8 * std::sin(a)});
      }
      for (const PhaseFunction* p : {&ph, &model}) {
        BushDisjointness D = bush_disjointness(*p, {0.0, 0.0, 0.5}, xis, delta, 0.05, {0.0, 1.0});
        if (!D.disjoint) fail("bush tubes overlap for " + p->label + at);
      }
    }

    // Prism compatibility between nearby base points.
    {
      CurveFamily F = family_by_label("hairbrush:model");
      double r = delta > 0.03 ? 1.0 : 0.5, rho = std::min(std::sqrt(delta * r), delta / r);
      PrismDecomposition P = prism_decomposition(F, {0.6, 0.3, 0.0}, rho, delta, r);
      PrismDecomposition Q = prism_decomposition(F, {0.6 + 0.6 * rho, 0.3 - 0.5 * rho, 0.3 * rho}, rho, delta, r);
      double worst = 0.0;
      std::size_t tiles = 0;
      for (const auto& tile : Q.tiles({0.3, 1.5})) {
        double tc = 2.0 * Q.d * static_cast<double>(tile.a);
        if (std::abs(tile.b) > 1 || tc - Q.d < 0.3 || tc + Q.d > 1.5) continue;
        worst = std::max(worst, prism_compatibility_distance(P, Q, tile));
        ++tiles;
      }
      if (tiles == 0) fail("no prism tiles checked" + at);
      if (worst > 4.0 * delta) fail("prism compatibility excess " + g(worst) + at);
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("prism excess ") + g(worst / delta) + " delta" + at;
    }
  }
  time_limit(o, since(t0), 120.0);
  return o;
}

// 11. Byte-identical output across reruns and worker counts 1 and 4.
Outcome c11() {
  Outcome o;
  const char* prev = std::getenv("KAKEYA_LAB_WORKERS");
  std::string saved = prev ? prev : "";
  std::size_t n = 0;
  for (const auto& e : experiment_registry()) {
    Json cfg = resolve_config(e.name, Json::object());
    std::string ref;
    for (const char* w : {"1", "1", "4"}) {
      setenv("KAKEYA_LAB_WORKERS", w, 1);
      ExperimentResult r = run_experiment(cfg);
      std::ostringstream os;
      emit(r, "json", os);
      emit(r, "csv", os);
      if (ref.empty())
        ref = os.str();
      else if (os.str() != ref) {
        o.pass = false;
        o.detail += e.name + " differs with " + w + " workers; ";
      }
    }
    ++n;
  }
  if (prev)
    setenv("KAKEYA_LAB_WORKERS", saved.c_str(), 1);
  else
    unsetenv("KAKEYA_LAB_WORKERS");
  o.detail += std::to_string(n) + " experiments x 3 runs compared";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::map<int, std::function<Outcome()>> all{{1, c1}, {2, c2}, {3, c3}, {4, c4}, {5, c5},  {6, c6},
                                              {7, c7}, {8, c8}, {9, c9}, {10, c10}, {11, c11}};
  std::vector<int> which;
  if (argc > 1) {
    int k = std::atoi(argv[1]);
    if (!all.count(k)) {
      std::cerr << "usage: acceptance [1-11]\n";
      return 2;
    }
    which.push_back(k);
  } else {
    for (auto& [k, f] : all) which.push_back(k);
  }
  int failed = 0;
  for (int k : which) {
    Outcome o;
    try {
      o = all[k]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
