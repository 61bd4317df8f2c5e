// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   rfimp_acceptance [--reps N] [--n N] [--report DIR]
//
// Criteria 7-11 run the simulation study at desk scale (200 reps, n = 1000,
// m = 10, maxit = 10, trees = 10). A criterion that misses its band only by
// Monte Carlo slack is re-run at 500 reps before being judged.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rfimp/ampute.hpp"
#include "rfimp/error_distribution.hpp"
#include "rfimp/mice.hpp"
#include "rfimp/regression.hpp"
#include "rfimp/simstudy.hpp"

using namespace rfimp;
using Clock = std::chrono::steady_clock;

namespace {

struct Options {
  std::size_t reps = 200;
  std::size_t rerun_reps = 500;
  std::size_t n = 1000;
  std::string report_dir;
};

// One bound check inside a criterion. `slack` is how far past the bound a
// value may sit and still count as a marginal miss.
struct Check {
  std::string label;
  double value;
  bool ok;
  bool marginal;
};

struct Verdict {
  bool pass = true;
  bool marginal_only = true;
  std::vector<Check> checks;
  std::string note;

  void add(std::string label, double value, bool ok, double distance_past_bound, double slack) {
    checks.push_back({std::move(label), value, ok, !ok && distance_past_bound <= slack});
    if (!ok) {
      pass = false;
      if (distance_past_bound > slack) marginal_only = false;
    }
  }
  void less(const std::string& label, double v, double bound, double slack) {
    add(label + " < " + fmt(bound), v, v < bound, v - bound, slack);
  }
  void greater(const std::string& label, double v, double bound, double slack) {
    add(label + " > " + fmt(bound), v, v > bound, bound - v, slack);
  }
  void within(const std::string& label, double v, double lo, double hi, double slack) {
    add(label + " in (" + fmt(lo) + ", " + fmt(hi) + ")", v, v > lo && v < hi, std::max(lo - v, v - hi), slack);
  }
  void abs_at_most(const std::string& label, double v, double bound, double slack) {
    add("|" + label + "| <= " + fmt(bound), v, std::abs(v) <= bound, std::abs(v) - bound, slack);
  }
  void require(const std::string& label, bool ok) {
    add(label, ok ? 1 : 0, ok, std::numeric_limits<double>::infinity(), 0);
  }

  static std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  }
  std::string failures() const {
    std::string out;
    for (const auto& c : checks)
      if (!c.ok) out += (out.empty() ? "" : "; ") + c.label + " (got " + fmt(c.value) + ")";
    return out;
  }
};

constexpr double kBiasSlack = 0.01;
constexpr double kCoverageSlack = 0.02;
constexpr double kWidthSlack = 0.05;

// ---------------------------------------------------------------- 1 to 6

Verdict criterion_forest_oob() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng gen(101);
  bool all_equal = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + uniform_index(gen, 51);
    const std::size_t p = 1 + uniform_index(gen, 4);
    std::vector<std::vector<double>> cols(p, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t f = 0; f < p; ++f) {
        cols[f][i] = standard_normal(gen);
        s += cols[f][i];
      }
      y[i] = s + standard_normal(gen);
    }
    const FeatureMatrix x(cols, std::vector<FeatureInfo>(p));
    ForestParams fp;
    fp.n_trees = 1 + uniform_index(gen, 15);
    fp.rng_seed = gen();
    const Forest f = Forest::fit(x, y, Task::Regression, fp);
    for (std::size_t r = 0; r < n; ++r) {
      const auto got = f.oob_predict(x, r);
      const auto want = oracle::oob_prediction(f, x, r);
      if (got.has_value() != want.has_value() || (got && *got != *want)) all_equal = false;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  v.require("oob_predict equals the brute-force recomputation on 20 datasets", all_equal);
  v.less("runtime seconds", secs, 5.0, 0);
  return v;
}

Verdict criterion_error_distribution() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng gen(202);
  bool sizes = true, mse = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + uniform_index(gen, 200);
    std::vector<double> a(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = standard_normal(gen);
      y[i] = 2 * a[i] + standard_normal(gen);
    }
    const FeatureMatrix x({a}, {FeatureInfo{}});
    ForestParams fp;
    fp.n_trees = 10;
    fp.rng_seed = gen();
    const Forest f = Forest::fit(x, y, Task::Regression, fp);
    const auto d = ErrorDistribution::build(f, x, y);
    sizes = sizes && d.size() + d.n_excluded() == n;
    double ss = 0;
    for (double e : d.errors()) ss += e * e;
    mse = mse && std::abs(ss / static_cast<double>(d.size()) - d.oob_mse()) <= 1e-12;
  }
  std::vector<double> a(50), c(50, 4.25);
  for (std::size_t i = 0; i < 50; ++i) a[i] = static_cast<double>(i);
  const FeatureMatrix x({a}, {FeatureInfo{}});
  ForestParams fp;
  fp.rng_seed = 3;
  const auto d = ErrorDistribution::build(Forest::fit(x, c, Task::Regression, fp), x, c);
  bool zeros = d.oob_mse() == 0.0;
  for (double e : d.errors()) zeros = zeros && e == 0.0;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  v.require("|errors| + n_excluded = n", sizes);
  v.require("mean(errors^2) = oob_mse to 1e-12", mse);
  v.require("constant target gives an all-zero pool", zeros);
  v.less("runtime seconds", secs, 1.0, 0);
  return v;
}

Dataset paper_amputed(std::size_t n, std::uint64_t seed) {
  ScenarioConfig sc;
  sc.n_obs = n;
  Rng rng(seed);
  const Dataset full = generate(sc, rng);
  AmputeConfig ac;
  ac.pattern_columns = {"X", "XZ"};
  ac.rng_seed = seed + 1;
  return ampute(full, ac);
}

Verdict criterion_mice_contracts() {
  Verdict v;
  const auto t0 = Clock::now();
  const Dataset ds = paper_amputed(300, 303);
  bool preserved = true, deterministic = true, independent = true;
  for (Method m : {Method::EmpiricalRF, Method::NormalRF, Method::PMM}) {
    ImputationConfig cfg = ImputationConfig::uniform(ds, m);
    cfg.n_imputations = 3;
    cfg.n_iterations = 3;
    cfg.rng_seed = 17;
    const auto a = run(ds, cfg);
    const auto b = run(ds, cfg);
    for (std::size_t k = 0; k < 3; ++k) {
      const Dataset& out = a.completed[k];
      preserved = preserved && out.n_missing() == 0;
      for (std::size_t c = 0; c < ds.n_cols(); ++c)
        for (std::size_t r : ds.column(c).observed_rows())
          preserved = preserved && out.column(c).values()[r] == ds.column(c).values()[r];
      deterministic = deterministic && out == b.completed[k];
    }
    cfg.n_imputations = 1;
    independent = independent && run(ds, cfg).completed[0] == a.completed[0];
  }
  ScenarioConfig sc;
  sc.n_obs = 50;
  Rng rng(4);
  const Dataset complete = generate(sc, rng);
  ImputationConfig cfg;
  cfg.n_imputations = 3;
  bool identity = true;
  for (const auto& out : run(complete, cfg).completed) identity = identity && out == complete;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  v.require("observed cells preserved", preserved);
  v.require("deterministic under a fixed seed", deterministic);
  v.require("chain independence", independent);
  v.require("no-missing input returns copies", identity);
  v.less("runtime seconds", secs, 10.0, 0);
  return v;
}

Verdict criterion_amputation() {
  Verdict v;
  const auto t0 = Clock::now();
  ScenarioConfig sc;
  sc.n_obs = 100000;
  Rng rng(404);
  const Dataset full = generate(sc, rng);
  for (Mechanism mech : {Mechanism::MCAR, Mechanism::MAR_right}) {
    AmputeConfig ac;
    ac.pattern_columns = {"X", "XZ"};
    ac.mechanism = mech;
    ac.weight_column = "Y";
    ac.rng_seed = 405;
    const Dataset out = ampute(full, ac);
    const auto& x = out.column("X");
    const double frac = static_cast<double>(x.n_missing()) / static_cast<double>(out.n_rows());
    v.within(std::string(mechanism_name(mech)) + " missing proportion", frac, 0.49, 0.51, 0);
    if (mech == Mechanism::MAR_right) {
      const auto& y = full.column("Y").values();
      double mean = 0, ss = 0;
      for (double val : y) mean += val;
      mean /= static_cast<double>(y.size());
      for (double val : y) ss += (val - mean) * (val - mean);
      const double sd = std::sqrt(ss / static_cast<double>(y.size() - 1));
      std::vector<double> z(y.size());
      std::vector<int> r(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        z[i] = (y[i] - mean) / sd;
        r[i] = x.is_missing(i) ? 1 : 0;
      }
      v.greater("mar-right logistic slope of missingness on standardized Y", oracle::logistic_fit(z, r).second,
                0.0, 0);
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  v.less("runtime seconds", secs, 10.0, 0);
  return v;
}

FitResult fit_of(std::vector<double> est, std::vector<double> se) {
  FitResult f;
  f.names = {"(Intercept)", "X"};
  f.estimates = std::move(est);
  f.standard_errors = std::move(se);
  f.n = 100;
  f.residual_df = 98;
  return f;
}

Verdict criterion_pooling() {
  Verdict v;
  const std::vector<FitResult> two{fit_of({0, 1.0}, {1, std::sqrt(0.5)}), fit_of({0, 2.0}, {1, std::sqrt(0.5)})};
  const auto& c = pool(two).coefficient("X");
  v.abs_at_most("qbar - 1.5", c.estimate - 1.5, 1e-12, 0);
  v.abs_at_most("B - 0.5", c.between - 0.5, 1e-12, 0);
  v.abs_at_most("Ubar - 0.5", c.within - 0.5, 1e-12, 0);
  v.abs_at_most("T - 1.25", c.total - 1.25, 1e-12, 0);
  const std::vector<FitResult> same(4, fit_of({0, 0.7}, {1, 0.2}));
  const auto& s = pool(same).coefficient("X");
  const auto single = t_interval(0.7, 0.2, s.df);
  v.require("B = 0 gives T = Ubar and the single-fit interval",
            s.between == 0.0 && std::abs(s.total - 0.04) < 1e-15 && std::abs(s.ci.low - single.low) < 1e-12 &&
                std::abs(s.ci.high - single.high) < 1e-12);
  return v;
}

Verdict criterion_ols() {
  Verdict v;
  ScenarioConfig sc;
  sc.n_obs = 1000;
  sc.noise_sd = 0;
  Rng rng(606);
  const auto f = fit_interaction_model(generate(sc, rng));
  const double truth[] = {0, 1, 1, -1};
  double worst = 0;
  for (std::size_t j = 0; j < 4; ++j) worst = std::max(worst, std::abs(f.estimates[j] - truth[j]));
  v.abs_at_most("max |estimate - (0, 1, 1, -1)|", worst, 1e-8, 0);
  return v;
}

// ---------------------------------------------------------------- 7 to 11

struct Study {
  Mechanism mechanism;
  std::size_t reps;
  StudyResult result;
};

Study run_scenario(Mechanism mech, std::size_t reps, const Options& opt) {
  ScenarioConfig cfg;
  cfg.n_obs = opt.n;
  cfg.n_reps = reps;
  cfg.mechanism = mech;
  cfg.rng_seed = 20200623;
  cfg.threads = 0;
  const auto t0 = Clock::now();
  Study s{mech, reps, run_study(cfg)};
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("-- %s study: %zu reps, n = %zu, %.0f s, %zu failed reps\n",
              std::string(mechanism_name(mech)).c_str(), reps, opt.n, secs, s.result.n_failed);
  std::printf("   %-9s %-3s %10s %8s %8s\n", "method", "coef", "rel.bias", "width", "coverage");
  for (const auto& row : s.result.summary)
    std::printf("   %-9s %-3s %+10.4f %8.4f %8.3f\n", row.arm.c_str(), row.coefficient.c_str(),
                row.median_relative_bias, row.median_ci_width, row.coverage);
  std::printf("   OOB exclusion: mean %.4f, max %.4f over %zu RF steps (%zu steps >= 1%%)\n",
              s.result.oob.mean_fraction, s.result.oob.max_fraction, s.result.oob.steps,
              s.result.oob.steps_at_or_above_1pct);
  if (!opt.report_dir.empty())
    write_report(s.result, std::filesystem::path(opt.report_dir) /
                               (std::string(mechanism_name(mech)) + "_" + std::to_string(reps)));
  std::fflush(stdout);
  return s;
}

Verdict criterion_7(const StudyResult& r) {
  Verdict v;
  for (const char* arm : {"Empirical", "Normal"}) {
    v.abs_at_most(std::string(arm) + " X bias", r.row(arm, "X").median_relative_bias, 0.02, kBiasSlack);
    v.within(std::string(arm) + " X coverage", r.row(arm, "X").coverage, 0.93, 0.995, kCoverageSlack);
  }
  v.greater("PMM X bias", r.row("PMM", "X").median_relative_bias, 0.01, kBiasSlack);
  v.less("PMM X coverage", r.row("PMM", "X").coverage, 0.90, kCoverageSlack);
  return v;
}

Verdict criterion_8(const StudyResult& r) {
  Verdict v;
  for (const char* arm : {"Empirical", "Normal", "PMM"}) {
    v.abs_at_most(std::string(arm) + " XZ bias", r.row(arm, "XZ").median_relative_bias, 0.03, kBiasSlack);
    v.within(std::string(arm) + " XZ coverage", r.row(arm, "XZ").coverage, 0.90, 0.98, kCoverageSlack);
  }
  return v;
}

Verdict criterion_9(const StudyResult& r) {
  Verdict v;
  const double orig = r.row("Original", "X").median_ci_width;
  const double pmm = r.row("PMM", "X").median_ci_width;
  const double emp = r.row("Empirical", "X").median_ci_width;
  const double nor = r.row("Normal", "X").median_ci_width;
  v.less("width(Original)/width(PMM)", orig / pmm, 1.0, kWidthSlack);
  v.less("width(PMM)/width(Empirical)", pmm / emp, 1.0, kWidthSlack);
  v.less("width(PMM)/width(Normal)", pmm / nor, 1.0, kWidthSlack);
  v.abs_at_most("relative difference width(Empirical) vs width(Normal)", (emp - nor) / ((emp + nor) / 2), 0.15,
                kWidthSlack);
  return v;
}

Verdict criterion_10(const StudyResult& r) {
  Verdict v;
  v.less("Complete X bias", r.row("Complete", "X").median_relative_bias, -0.08, kBiasSlack);
  v.less("Complete X coverage", r.row("Complete", "X").coverage, 0.25, kCoverageSlack);
  for (const char* arm : {"Empirical", "Normal"}) {
    v.abs_at_most(std::string(arm) + " X bias", r.row(arm, "X").median_relative_bias, 0.03, kBiasSlack);
    v.greater(std::string(arm) + " X coverage", r.row(arm, "X").coverage, 0.93, kCoverageSlack);
  }
  v.less("PMM X coverage", r.row("PMM", "X").coverage, 0.92, kCoverageSlack);
  return v;
}

Verdict criterion_11(const StudyResult& r) {
  Verdict v;
  v.less("Complete XZ bias", r.row("Complete", "XZ").median_relative_bias, -0.04, kBiasSlack);
  v.less("Complete XZ coverage", r.row("Complete", "XZ").coverage, 0.10, kCoverageSlack);
  for (const char* arm : {"Empirical", "Normal"})
    v.abs_at_most(std::string(arm) + " XZ bias", r.row(arm, "XZ").median_relative_bias, 0.02, kBiasSlack);
  v.less("PMM XZ coverage - Empirical XZ coverage",
         r.row("PMM", "XZ").coverage - r.row("Empirical", "XZ").coverage, 0.0, kCoverageSlack);
  return v;
}

Verdict criterion_12(const Options& opt) {
  ScenarioConfig cfg;
  cfg.n_obs = 1000;
  cfg.n_reps = 10;
  cfg.n_trees = 10;
  cfg.methods = {Method::EmpiricalRF};
  cfg.rng_seed = 12;
  cfg.threads = 0;
  const auto r = run_study(cfg);
  Verdict v;
  v.require("no failed reps", r.n_failed == 0);
  v.less("max fraction of training rows excluded from the OOB pool, any step", r.oob.max_fraction, 0.01, 0);
  std::ostringstream note;
  note << r.oob.steps_at_or_above_1pct << " of " << r.oob.steps << " steps at or above 1%, mean fraction "
       << r.oob.mean_fraction;
  v.note = note.str();
  (void)opt;
  return v;
}

void print(int id, const Verdict& v, const std::string& suffix = "") {
  std::printf("criterion %2d: %s%s", id, v.pass ? "PASS" : "FAIL", suffix.c_str());
  if (!v.pass) std::printf(" - %s", v.failures().c_str());
  if (!v.note.empty()) std::printf(" [%s]", v.note.c_str());
  std::printf("\n");
  std::fflush(stdout);
}

Options parse(int argc, char** argv) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", a.c_str());
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--reps")
      o.reps = std::stoul(next());
    else if (a == "--rerun-reps")
      o.rerun_reps = std::stoul(next());
    else if (a == "--n")
      o.n = std::stoul(next());
    else if (a == "--report")
      o.report_dir = next();
    else {
      std::fprintf(stderr, "usage: rfimp_acceptance [--reps N] [--rerun-reps N] [--n N] [--report DIR]\n");
      std::exit(2);
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const Options opt = parse(argc, argv);
  std::vector<std::pair<int, Verdict>> results;

  auto fast = [&](int id, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.require(std::string("threw: ") + e.what(), false);
    }
    results.emplace_back(id, v);
  };
  fast(1, criterion_forest_oob);
  fast(2, criterion_error_distribution);
  fast(3, criterion_mice_contracts);
  fast(4, criterion_amputation);
  fast(5, criterion_pooling);
  fast(6, criterion_ols);

  std::optional<Study> mcar, mar, mcar_big, mar_big;
  auto judge = [&](int id, Mechanism mech, Verdict (*fn)(const StudyResult&)) {
    auto& base = mech == Mechanism::MCAR ? mcar : mar;
    auto& big = mech == Mechanism::MCAR ? mcar_big : mar_big;
    if (!base) base = run_scenario(mech, opt.reps, opt);
    Verdict v = fn(base->result);
    std::string suffix = " (" + std::to_string(opt.reps) + " reps)";
    if (!v.pass && v.marginal_only && opt.rerun_reps > opt.reps) {
      if (!big) big = run_scenario(mech, opt.rerun_reps, opt);
      v = fn(big->result);
      suffix = " (marginal at " + std::to_string(opt.reps) + " reps, judged at " + std::to_string(opt.rerun_reps) +
               " reps)";
    }
    results.emplace_back(id, v);
    print(id, v, suffix);
  };

  for (const auto& [id, v] : results) print(id, v);
  try {
    judge(7, Mechanism::MCAR, criterion_7);
    judge(8, Mechanism::MCAR, criterion_8);
    judge(9, Mechanism::MCAR, criterion_9);
    judge(10, Mechanism::MAR_right, criterion_10);
    judge(11, Mechanism::MAR_right, criterion_11);
    Verdict v12 = criterion_12(opt);
    results.emplace_back(12, v12);
    print(12, v12, " (10 reps)");
  } catch (const std::exception& e) {
    std::printf("simulation aborted: %s\n", e.what());
    return 1;
  }

  std::size_t failed = 0;
  for (const auto& [id, v] : results) failed += v.pass ? 0 : 1;
  std::printf("%zu of %zu criteria passed\n", results.size() - failed, results.size());
  return failed ? 1 : 0;
}
