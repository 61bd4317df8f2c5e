#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rfimp/ampute.hpp"
#include "rfimp/dataset.hpp"
#include "rfimp/mice.hpp"
#include "rfimp/random.hpp"
#include "rfimp/regression.hpp"

namespace rfimp {

/// Joint: X and XZ always missing together. Mixed: an incomplete row misses
/// X only, XZ only, or both, with equal probability.
enum class PatternDesign { Joint, Mixed };

std::string_view pattern_design_name(PatternDesign p) noexcept;
PatternDesign parse_pattern_design(std::string_view name);

struct TrueCoefficients {
  double intercept = 0.0;
  double x = 1.0;
  double z = 1.0;
  double xz = -1.0;

  double of(std::string_view name) const;
};

/// Simulation scenario: Y = b0 + bx X + bz Z + bxz XZ + e with independent
/// normal X, Z and e, followed by amputation of {X, XZ} and imputation.
struct ScenarioConfig {
  std::size_t n_obs = 2000;
  std::size_t n_reps = 1000;
  double mu_x = 2.0;
  double mu_z = 2.0;
  double sd_x = 1.0;
  double sd_z = 1.0;
  double noise_sd = 1.0;
  TrueCoefficients truth;

  Mechanism mechanism = Mechanism::MCAR;
  double prop = 0.5;
  PatternDesign patterns = PatternDesign::Joint;

  std::vector<Method> methods{Method::EmpiricalRF, Method::NormalRF, Method::PMM};
  std::size_t n_imputations = 10;
  std::size_t n_iterations = 10;
  std::size_t n_trees = 10;
  std::size_t pmm_donors = 5;

  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;  // reps run concurrently when > 1

  void validate() const;
};

/// Complete dataset with columns X, Z, XZ, Y.
Dataset generate(const ScenarioConfig& cfg, Rng& rng);

/// Report label of an imputation method: Empirical, Normal, PMM, Sample.
std::string arm_name(Method m);

struct RawRecord {
  std::size_t rep = 0;
  std::string arm;  // Original, Complete, or an imputation method label
  std::string coefficient;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool covered = false;
};

struct SummaryRow {
  std::string arm;
  std::string coefficient;
  double median_relative_bias = 0.0;
  double median_ci_width = 0.0;
  double coverage = 0.0;
  std::size_t n_reps = 0;
};

/// Fraction of training rows left out of the OOB error pool, over every RF
/// imputation step of the study.
struct OobExclusionStats {
  std::size_t steps = 0;
  std::size_t steps_at_or_above_1pct = 0;
  double max_fraction = 0.0;
  double mean_fraction = 0.0;
  std::size_t normal_fallbacks = 0;
};

struct StudyResult {
  std::vector<RawRecord> raw;
  std::vector<SummaryRow> summary;
  std::size_t n_failed = 0;
  std::vector<std::string> failures;
  OobExclusionStats oob;
  std::size_t ridge_steps = 0;
  std::map<std::string, double> seconds;  // wall-clock per arm, summed over reps

  const SummaryRow& row(std::string_view arm, std::string_view coefficient) const;
};

/// Per rep: generate, fit Original, ampute {X, XZ}, fit complete cases, then
/// impute with every configured method and pool the m fits. Reps use seeds
/// derived from (rng_seed, rep) so results do not depend on `threads`.
StudyResult run_study(const ScenarioConfig& cfg,
                      const std::function<void(std::size_t done)>& progress = {});

/// Columns: rep,method,coefficient,estimate,ci_low,ci_high,covered
void write_raw_csv(const StudyResult& result, std::ostream& out);
/// Columns: method,coefficient,median_relative_bias,median_ci_width,coverage,n_reps
void write_summary_csv(const StudyResult& result, std::ostream& out);
void write_diagnostics_csv(const StudyResult& result, std::ostream& out);
/// Writes raw.csv and summary.csv into `dir`, creating it if needed.
void write_report(const StudyResult& result, const std::filesystem::path& dir);

double median(std::vector<double> values);

}  // namespace rfimp
