#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfimp/dataset.hpp"
#include "rfimp/forest.hpp"
#include "rfimp/random.hpp"

namespace rfimp {

enum class Method { EmpiricalRF, NormalRF, PMM, RandomSample };

std::string_view method_name(Method m) noexcept;
/// Accepts "empirical", "normal", "pmm", "sample" (case-sensitive).
Method parse_method(std::string_view name);

struct ImputationConfig {
  std::size_t n_imputations = 10;
  std::size_t n_iterations = 10;
  std::map<std::string, Method> methods;  // keyed by column name
  ForestParams forest;
  std::size_t pmm_donors = 5;
  std::vector<std::string> visit_sequence;  // empty: incomplete columns in dataset order
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;  // chains run concurrently when > 1

  /// Same method for every incomplete column of `ds`.
  static ImputationConfig uniform(const Dataset& ds, Method method);
};

/// Diagnostics of one column update inside one chain.
struct StepRecord {
  std::size_t imputation = 0;
  std::size_t iteration = 0;
  std::string column;
  std::size_t n_train = 0;     // rows the model was trained on
  std::size_t n_excluded = 0;  // training rows without an OOB prediction (RF methods)
  bool normal_fallback = false;
  bool ridge = false;
};

struct TraceEntry {
  std::size_t imputation = 0;
  std::size_t iteration = 0;
  std::string column;
  double mean = 0.0;  // mean of the imputed cells after this iteration
};

struct ImputationResult {
  std::vector<Dataset> completed;
  std::vector<TraceEntry> chain_means;
  std::vector<StepRecord> steps;

  std::size_t fallback_count() const noexcept;
  std::size_t ridge_count() const noexcept;
};

/// Draws for the missing rows of one column, aligned with `rows`.
struct ColumnDraw {
  std::vector<std::size_t> rows;
  std::vector<double> values;
  std::size_t n_train = 0;
  std::size_t n_excluded = 0;
  bool normal_fallback = false;
  bool ridge = false;
};

/// Fills every missing cell with a uniform draw from the observed values of
/// its column.
Dataset initialize_chain(const Dataset& ds, Rng& rng);

/// Random-forest draws for the rows of `target` flagged missing in `ds`; all
/// other columns must be complete. A bootstrap of the observed rows trains the
/// forest. Continuous targets get prediction plus an OOB error drawn from the
/// empirical pool (EmpiricalRF) or from Normal(0, OOB MSE) (NormalRF);
/// categorical targets get a class drawn from the predicted probabilities.
ColumnDraw impute_column_rf(const Dataset& ds, std::size_t target, Method method,
                            const ForestParams& params, Rng& rng);

/// Type-1 predictive mean matching with a Bayesian coefficient draw.
ColumnDraw impute_column_pmm(const Dataset& ds, std::size_t target, std::size_t donors, Rng& rng);

/// Uniform draws from the observed values of `target`.
ColumnDraw impute_column_sample(const Dataset& ds, std::size_t target, Rng& rng);

ImputationResult run(const Dataset& ds, const ImputationConfig& cfg);

}  // namespace rfimp
