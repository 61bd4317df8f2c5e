#include "rfimp/simstudy.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>

#include "rfimp/csv.hpp"
#include "rfimp/error.hpp"
#include "rfimp/parallel.hpp"

namespace rfimp {

namespace {

const std::vector<std::string> kReportedCoefficients{"X", "Z", "XZ"};

struct RepOutput {
  std::vector<RawRecord> raw;
  std::vector<StepRecord> rf_steps;
  std::size_t ridge_steps = 0;
  std::map<std::string, double> seconds;
  std::string failure;
};

void record_fit(RepOutput& out, std::size_t rep, const std::string& arm, const FitResult& fit,
                const TrueCoefficients& truth) {
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const Interval ci = t_interval(fit.estimates[j], fit.standard_errors[j],
                                   static_cast<double>(fit.residual_df));
    out.raw.push_back({rep, arm, fit.names[j], fit.estimates[j], ci.low, ci.high,
                       ci.contains(truth.of(fit.names[j]))});
  }
}

void record_pooled(RepOutput& out, std::size_t rep, const std::string& arm, const PooledFit& fit,
                   const TrueCoefficients& truth) {
  for (const auto& c : fit.coefficients)
    out.raw.push_back({rep, arm, c.name, c.estimate, c.ci.low, c.ci.high,
                       c.ci.contains(truth.of(c.name))});
}

RepOutput run_rep(const ScenarioConfig& cfg, std::size_t rep) {
  using Clock = std::chrono::steady_clock;
  RepOutput out;
  Rng gen_rng(derive_seed(cfg.rng_seed, {rep, 0}));
  const Dataset full = generate(cfg, gen_rng);

  auto t0 = Clock::now();
  record_fit(out, rep, "Original", fit_interaction_model(full), cfg.truth);
  out.seconds["Original"] += std::chrono::duration<double>(Clock::now() - t0).count();

  AmputeConfig acfg;
  acfg.pattern_columns = {"X", "XZ"};
  acfg.prop = cfg.prop;
  acfg.mechanism = cfg.mechanism;
  acfg.weight_column = "Y";
  if (cfg.patterns == PatternDesign::Mixed) acfg.patterns = mixed_patterns(acfg.pattern_columns);
  Rng amp_rng(derive_seed(cfg.rng_seed, {rep, 1}));
  const Dataset amputed = ampute(full, acfg, amp_rng);

  t0 = Clock::now();
  record_fit(out, rep, "Complete", fit_interaction_model(amputed), cfg.truth);
  out.seconds["Complete"] += std::chrono::duration<double>(Clock::now() - t0).count();

  for (const Method method : cfg.methods) {
    t0 = Clock::now();
    ImputationConfig icfg = ImputationConfig::uniform(amputed, method);
    icfg.n_imputations = cfg.n_imputations;
    icfg.n_iterations = cfg.n_iterations;
    icfg.forest.n_trees = cfg.n_trees;
    icfg.pmm_donors = cfg.pmm_donors;
    icfg.rng_seed = derive_seed(cfg.rng_seed, {rep, 2, static_cast<std::uint64_t>(method)});
    const ImputationResult imp = run(amputed, icfg);

    std::vector<FitResult> fits;
    fits.reserve(imp.completed.size());
    for (const auto& ds : imp.completed) fits.push_back(fit_interaction_model(ds));
    const std::string arm = arm_name(method);
    if (fits.size() >= 2) {
      record_pooled(out, rep, arm, pool(fits), cfg.truth);
    } else {
      record_fit(out, rep, arm, fits.front(), cfg.truth);
    }
    if (method == Method::EmpiricalRF || method == Method::NormalRF)
      out.rf_steps.insert(out.rf_steps.end(), imp.steps.begin(), imp.steps.end());
    out.ridge_steps += imp.ridge_count();
    out.seconds[arm] += std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return out;
}

}  // namespace

std::string_view pattern_design_name(PatternDesign p) noexcept {
  return p == PatternDesign::Joint ? "joint" : "mixed";
}

PatternDesign parse_pattern_design(std::string_view name) {
  if (name == "joint") return PatternDesign::Joint;
  if (name == "mixed") return PatternDesign::Mixed;
  throw Error("simstudy", "unknown pattern design \"" + std::string(name) + "\"");
}

double TrueCoefficients::of(std::string_view name) const {
  if (name == "(Intercept)") return intercept;
  if (name == "X") return x;
  if (name == "Z") return z;
  if (name == "XZ") return xz;
  throw Error("simstudy", "unknown coefficient \"" + std::string(name) + "\"");
}

void ScenarioConfig::validate() const {
  if (n_obs < 10) throw Error("simstudy", "n_obs must be at least 10");
  if (n_reps < 1) throw Error("simstudy", "n_reps must be at least 1");
  if (!(prop > 0.0 && prop < 1.0)) throw Error("simstudy", "prop must lie in (0, 1)");
  if (n_imputations < 1 || n_iterations < 1 || n_trees < 1)
    throw Error("simstudy", "imputations, iterations and trees must be at least 1");
  if (sd_x < 0 || sd_z < 0 || noise_sd < 0) throw Error("simstudy", "standard deviations must be >= 0");
}

Dataset generate(const ScenarioConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.n_obs;
  std::vector<double> x(n), z(n), xz(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = cfg.mu_x + cfg.sd_x * standard_normal(rng);
    z[i] = cfg.mu_z + cfg.sd_z * standard_normal(rng);
    const double e = cfg.noise_sd * standard_normal(rng);
    xz[i] = x[i] * z[i];
    y[i] = cfg.truth.intercept + cfg.truth.x * x[i] + cfg.truth.z * z[i] + cfg.truth.xz * xz[i] + e;
  }
  Dataset ds;
  ds.add_column(Column(ColumnSpec::continuous("X"), std::move(x)));
  ds.add_column(Column(ColumnSpec::continuous("Z"), std::move(z)));
  ds.add_column(Column(ColumnSpec::continuous("XZ"), std::move(xz)));
  ds.add_column(Column(ColumnSpec::continuous("Y"), std::move(y)));
  return ds;
}

std::string arm_name(Method m) {
  switch (m) {
    case Method::EmpiricalRF: return "Empirical";
    case Method::NormalRF: return "Normal";
    case Method::PMM: return "PMM";
    case Method::RandomSample: return "Sample";
  }
  return "Unknown";
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

const SummaryRow& StudyResult::row(std::string_view arm, std::string_view coefficient) const {
  for (const auto& r : summary)
    if (r.arm == arm && r.coefficient == coefficient) return r;
  throw Error("simstudy", "no summary row for " + std::string(arm) + "/" + std::string(coefficient));
}

StudyResult run_study(const ScenarioConfig& cfg,
                      const std::function<void(std::size_t)>& progress) {
  cfg.validate();
  std::vector<RepOutput> reps(cfg.n_reps);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(cfg.n_reps, cfg.threads, [&](std::size_t r) {
    try {
      reps[r] = run_rep(cfg, r);
    } catch (const std::exception& e) {
      reps[r] = RepOutput{};
      reps[r].failure = "rep " + std::to_string(r) + ": " + e.what();
    }
    const std::size_t d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(d);
    }
  });

  StudyResult result;
  double fraction_sum = 0;
  for (const auto& rep : reps) {
    if (!rep.failure.empty()) {
      ++result.n_failed;
      result.failures.push_back(rep.failure);
      continue;
    }
    result.raw.insert(result.raw.end(), rep.raw.begin(), rep.raw.end());
    result.ridge_steps += rep.ridge_steps;
    for (const auto& [arm, s] : rep.seconds) result.seconds[arm] += s;
    for (const auto& step : rep.rf_steps) {
      const double f = static_cast<double>(step.n_excluded) / static_cast<double>(step.n_train);
      ++result.oob.steps;
      if (f >= 0.01) ++result.oob.steps_at_or_above_1pct;
      if (step.normal_fallback) ++result.oob.normal_fallbacks;
      result.oob.max_fraction = std::max(result.oob.max_fraction, f);
      fraction_sum += f;
    }
  }
  if (result.oob.steps) result.oob.mean_fraction = fraction_sum / static_cast<double>(result.oob.steps);

  std::vector<std::string> arms{"Original", "Complete"};
  for (const Method m : cfg.methods) arms.push_back(arm_name(m));
  for (const auto& arm : arms) {
    for (const auto& coef : kReportedCoefficients) {
      std::vector<double> bias;
      std::vector<double> width;
      std::size_t covered = 0;
      const double truth = cfg.truth.of(coef);
      for (const auto& rec : result.raw) {
        if (rec.arm != arm || rec.coefficient != coef) continue;
        bias.push_back((rec.estimate - truth) / truth);
        width.push_back(rec.ci_high - rec.ci_low);
        covered += rec.covered ? 1 : 0;
      }
      SummaryRow row;
      row.arm = arm;
      row.coefficient = coef;
      row.n_reps = bias.size();
      row.median_relative_bias = median(bias);
      row.median_ci_width = median(width);
      row.coverage = bias.empty() ? std::nan("") : static_cast<double>(covered) / static_cast<double>(bias.size());
      result.summary.push_back(std::move(row));
    }
  }
  return result;
}

void write_raw_csv(const StudyResult& result, std::ostream& out) {
  out << "rep,method,coefficient,estimate,ci_low,ci_high,covered\n";
  for (const auto& r : result.raw)
    out << r.rep << ',' << r.arm << ',' << r.coefficient << ',' << format_double(r.estimate) << ','
        << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ',' << (r.covered ? 1 : 0)
        << '\n';
}

void write_summary_csv(const StudyResult& result, std::ostream& out) {
  out << "method,coefficient,median_relative_bias,median_ci_width,coverage,n_reps\n";
  for (const auto& r : result.summary)
    out << r.arm << ',' << r.coefficient << ',' << format_double(r.median_relative_bias) << ','
        << format_double(r.median_ci_width) << ',' << format_double(r.coverage) << ',' << r.n_reps
        << '\n';
}

void write_diagnostics_csv(const StudyResult& result, std::ostream& out) {
  const std::size_t attempted = result.n_failed + (result.raw.empty() ? 0 : [&] {
    std::set<std::size_t> reps;
    for (const auto& r : result.raw) reps.insert(r.rep);
    return reps.size();
  }());
  out << "key,value\n";
  out << "reps," << attempted << '\n';
  out << "failed_reps," << result.n_failed << '\n';
  out << "rf_steps," << result.oob.steps << '\n';
  out << "rf_steps_excluding_1pct_or_more," << result.oob.steps_at_or_above_1pct << '\n';
  out << "oob_excluded_fraction_mean," << format_double(result.oob.mean_fraction) << '\n';
  out << "oob_excluded_fraction_max," << format_double(result.oob.max_fraction) << '\n';
  out << "normal_fallbacks," << result.oob.normal_fallbacks << '\n';
  out << "pmm_ridge_steps," << result.ridge_steps << '\n';
  for (auto f : result.failures) {
    for (std::size_t i = f.find('"'); i != std::string::npos; i = f.find('"', i + 2)) f.insert(i, 1, '"');
    out << "failure,\"" << f << "\"\n";
  }
}

void write_report(const StudyResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& path, auto&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("simstudy", "cannot open \"" + path.string() + "\" for writing");
    fn(result, out);
    if (!out) throw Error("simstudy", "write to \"" + path.string() + "\" failed");
  };
  write(dir / "raw.csv", write_raw_csv);
  write(dir / "summary.csv", write_summary_csv);
  write(dir / "diagnostics.csv", write_diagnostics_csv);
}

}  // namespace rfimp
