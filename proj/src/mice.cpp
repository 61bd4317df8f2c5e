#include "rfimp/mice.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rfimp/error.hpp"
#include "rfimp/error_distribution.hpp"
#include "rfimp/parallel.hpp"

namespace rfimp {

namespace {

std::vector<std::size_t> other_columns(const Dataset& ds, std::size_t target) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    if (c != target) cols.push_back(c);
  return cols;
}

ColumnDraw draw_rf(const Dataset& state, std::size_t target, std::span<const std::size_t> observed,
                   std::span<const std::size_t> missing, Method method, const ForestParams& params,
                   Rng& rng) {
  const Column& col = state.column(target);
  if (observed.size() < 2)
    throw Error("mice", "column \"" + col.name() + "\" needs at least two observed values");
  const auto predictors = other_columns(state, target);
  const FeatureMatrix all = FeatureMatrix::from_dataset(state, predictors);

  // Bootstrap of the observed rows: parameter uncertainty, separate from the
  // per-tree bagging inside the forest.
  std::vector<std::size_t> boot(observed.size());
  for (auto& b : boot) b = observed[uniform_index(rng, observed.size())];
  const FeatureMatrix x_train = all.select_rows(boot);
  std::vector<double> y_train(boot.size());
  for (std::size_t i = 0; i < boot.size(); ++i) y_train[i] = col.values()[boot[i]];
  const FeatureMatrix x_miss = all.select_rows(missing);

  ForestParams fp = params;
  fp.rng_seed = rng();

  ColumnDraw draw;
  draw.rows.assign(missing.begin(), missing.end());
  draw.values.resize(missing.size());
  draw.n_train = boot.size();

  if (col.kind() == ColumnKind::Categorical) {
    const std::size_t k = col.spec().n_levels();
    const Forest forest = Forest::fit(x_train, y_train, Task::Classification, fp, k);
    const auto proba = forest.predict_proba(x_miss);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      const std::span<const double> p(proba.data() + i * k, k);
      draw.values[i] = static_cast<double>(
          std::discrete_distribution<std::size_t>(p.begin(), p.end())(rng));
    }
    return draw;
  }

  const Forest forest = Forest::fit(x_train, y_train, Task::Regression, fp);
  const auto pred = forest.predict(x_miss);
  try {
    const auto dist = ErrorDistribution::build(forest, x_train, y_train);
    draw.n_excluded = dist.n_excluded();
    for (std::size_t i = 0; i < missing.size(); ++i)
      draw.values[i] = pred[i] + (method == Method::EmpiricalRF ? dist.sample(rng)
                                                                : dist.sample_normal(rng));
  } catch (const EmptyOobPool&) {
    // Every training row is in bag for every tree: use the in-bag residual
    // variance instead.
    const auto fitted = forest.predict(x_train);
    double ss = 0;
    for (std::size_t i = 0; i < fitted.size(); ++i) ss += (y_train[i] - fitted[i]) * (y_train[i] - fitted[i]);
    const double sd = std::sqrt(ss / static_cast<double>(fitted.size()));
    draw.n_excluded = boot.size();
    draw.normal_fallback = true;
    for (std::size_t i = 0; i < missing.size(); ++i)
      draw.values[i] = pred[i] + sd * standard_normal(rng);
  }
  return draw;
}

// Intercept, continuous predictors as-is, categorical predictors dummy-coded
// against their first level.
Eigen::MatrixXd design_matrix(const Dataset& state, std::span<const std::size_t> predictors,
                              std::span<const std::size_t> rows) {
  std::size_t q = 1;
  for (std::size_t c : predictors) {
    const Column& col = state.column(c);
    q += col.kind() == ColumnKind::Categorical ? col.spec().n_levels() - 1 : 1;
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    Eigen::Index j = 1;
    for (std::size_t c : predictors) {
      const Column& col = state.column(c);
      const double v = col.values()[rows[i]];
      if (std::isnan(v)) throw Error("mice", "predictor \"" + col.name() + "\" has missing cells");
      if (col.kind() == ColumnKind::Categorical) {
        const auto level = static_cast<Eigen::Index>(v);
        if (level > 0) x(r, j + level - 1) = 1.0;
        j += static_cast<Eigen::Index>(col.spec().n_levels()) - 1;
      } else {
        x(r, j++) = v;
      }
    }
  }
  return x;
}

ColumnDraw draw_pmm(const Dataset& state, std::size_t target, std::span<const std::size_t> observed,
                    std::span<const std::size_t> missing, std::size_t donors, Rng& rng) {
  const Column& col = state.column(target);
  if (col.kind() != ColumnKind::Continuous)
    throw Error("mice", "PMM requires a continuous column, \"" + col.name() + "\" is categorical");
  if (donors < 1) throw Error("mice", "PMM needs at least one donor");
  if (observed.size() < donors)
    throw Error("mice", "column \"" + col.name() + "\" has fewer observed values than donors");

  const auto predictors = other_columns(state, target);
  const Eigen::MatrixXd x_obs = design_matrix(state, predictors, observed);
  const Eigen::MatrixXd x_mis = design_matrix(state, predictors, missing);
  Eigen::VectorXd y(static_cast<Eigen::Index>(observed.size()));
  for (std::size_t i = 0; i < observed.size(); ++i) y(static_cast<Eigen::Index>(i)) = col.values()[observed[i]];

  const Eigen::Index q = x_obs.cols();
  Eigen::MatrixXd xtx = x_obs.transpose() * x_obs;
  ColumnDraw draw;
  draw.rows.assign(missing.begin(), missing.end());
  draw.values.resize(missing.size());
  draw.n_train = observed.size();

  const auto rank = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(x_obs).rank();
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (rank == q) llt.compute(xtx);
  if (rank < q || llt.info() != Eigen::Success) {
    const double ridge = 1e-5 * xtx.trace() / static_cast<double>(q);
    xtx.diagonal().array() += ridge;
    llt.compute(xtx);
    draw.ridge = true;
    if (llt.info() != Eigen::Success) throw Error("mice", "PMM design is singular after ridge");
  }
  const Eigen::VectorXd beta = llt.solve(x_obs.transpose() * y);
  const Eigen::VectorXd resid = y - x_obs * beta;
  const double df = std::max<double>(1.0, static_cast<double>(observed.size()) - static_cast<double>(q));
  const double chi2 = std::chi_squared_distribution<double>(df)(rng);
  const double sigma_star = std::sqrt(resid.squaredNorm() / chi2);

  const Eigen::MatrixXd v = llt.solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd v_sym = (v + v.transpose()) / 2;
  Eigen::VectorXd z(q);
  for (Eigen::Index j = 0; j < q; ++j) z(j) = standard_normal(rng);
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(v_sym).matrixL();
  const Eigen::VectorXd beta_star = beta + sigma_star * (l * z);

  const Eigen::VectorXd yhat_obs = x_obs * beta;
  const Eigen::VectorXd yhat_mis = x_mis * beta_star;

  const std::size_t n_obs = observed.size();
  std::vector<std::pair<double, std::size_t>> sorted(n_obs);
  for (std::size_t j = 0; j < n_obs; ++j) sorted[j] = {yhat_obs(static_cast<Eigen::Index>(j)), j};
  std::sort(sorted.begin(), sorted.end());

  std::vector<std::pair<double, std::size_t>> nearest;
  nearest.reserve(donors);
  for (std::size_t i = 0; i < missing.size(); ++i) {
    const double target_hat = yhat_mis(static_cast<Eigen::Index>(i));
    auto hi = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), std::pair{target_hat, std::size_t{0}}) -
        sorted.begin());
    std::size_t lo = hi;  // candidates are sorted[lo - 1] going down, sorted[hi] going up
    nearest.clear();
    while (nearest.size() < donors) {
      const bool has_lo = lo > 0, has_hi = hi < n_obs;
      const double d_lo = has_lo ? target_hat - sorted[lo - 1].first : 0.0;
      const double d_hi = has_hi ? sorted[hi].first - target_hat : 0.0;
      const bool take_lo = has_lo && (!has_hi || d_lo < d_hi ||
                                      (d_lo == d_hi && sorted[lo - 1].second < sorted[hi].second));
      if (take_lo) {
        nearest.emplace_back(d_lo, sorted[lo - 1].second);
        --lo;
      } else {
        nearest.emplace_back(d_hi, sorted[hi].second);
        ++hi;
      }
    }
    std::sort(nearest.begin(), nearest.end());
    const std::size_t pick = nearest[uniform_index(rng, donors)].second;
    draw.values[i] = y(static_cast<Eigen::Index>(pick));
  }
  return draw;
}

ColumnDraw draw_sample(const Dataset& state, std::size_t target, std::span<const std::size_t> observed,
                       std::span<const std::size_t> missing, Rng& rng) {
  const Column& col = state.column(target);
  if (observed.empty())
    throw Error("mice", "column \"" + col.name() + "\" has no observed values");
  ColumnDraw draw;
  draw.rows.assign(missing.begin(), missing.end());
  draw.values.resize(missing.size());
  draw.n_train = observed.size();
  for (std::size_t i = 0; i < missing.size(); ++i)
    draw.values[i] = col.values()[observed[uniform_index(rng, observed.size())]];
  return draw;
}

ColumnDraw draw_column(const Dataset& state, std::size_t target, std::span<const std::size_t> observed,
                       std::span<const std::size_t> missing, Method method,
                       const ImputationConfig& cfg, Rng& rng) {
  switch (method) {
    case Method::EmpiricalRF:
    case Method::NormalRF:
      return draw_rf(state, target, observed, missing, method, cfg.forest, rng);
    case Method::PMM:
      return draw_pmm(state, target, observed, missing, cfg.pmm_donors, rng);
    case Method::RandomSample:
      return draw_sample(state, target, observed, missing, rng);
  }
  throw Error("mice", "unknown method");
}

void check_predictors_complete(const Dataset& ds, std::size_t target) {
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    if (c != target && !ds.column(c).complete())
      throw Error("mice", "predictor \"" + ds.column(c).name() + "\" has missing cells");
}

}  // namespace

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::EmpiricalRF: return "empirical";
    case Method::NormalRF: return "normal";
    case Method::PMM: return "pmm";
    case Method::RandomSample: return "sample";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "empirical") return Method::EmpiricalRF;
  if (name == "normal") return Method::NormalRF;
  if (name == "pmm") return Method::PMM;
  if (name == "sample") return Method::RandomSample;
  throw Error("mice", "unknown imputation method \"" + std::string(name) + "\"");
}

ImputationConfig ImputationConfig::uniform(const Dataset& ds, Method method) {
  ImputationConfig cfg;
  for (const auto& col : ds.columns())
    if (!col.complete()) cfg.methods[col.name()] = method;
  return cfg;
}

std::size_t ImputationResult::fallback_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.normal_fallback; }));
}

std::size_t ImputationResult::ridge_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.ridge; }));
}

Dataset initialize_chain(const Dataset& ds, Rng& rng) {
  Dataset out = ds;
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    const Column& col = ds.column(c);
    if (col.complete()) continue;
    const auto observed = col.observed_rows();
    const auto missing = col.missing_rows();
    if (observed.empty())
      throw Error("mice", "column \"" + col.name() + "\" has no observed values");
    const auto draw = draw_sample(ds, c, observed, missing, rng);
    for (std::size_t i = 0; i < missing.size(); ++i) out.mutable_column(c).set(missing[i], draw.values[i]);
  }
  return out;
}

ColumnDraw impute_column_rf(const Dataset& ds, std::size_t target, Method method,
                            const ForestParams& params, Rng& rng) {
  if (method != Method::EmpiricalRF && method != Method::NormalRF)
    throw Error("mice", "impute_column_rf needs an RF method");
  check_predictors_complete(ds, target);
  const Column& col = ds.column(target);
  return draw_rf(ds, target, col.observed_rows(), col.missing_rows(), method, params, rng);
}

ColumnDraw impute_column_pmm(const Dataset& ds, std::size_t target, std::size_t donors, Rng& rng) {
  check_predictors_complete(ds, target);
  const Column& col = ds.column(target);
  return draw_pmm(ds, target, col.observed_rows(), col.missing_rows(), donors, rng);
}

ColumnDraw impute_column_sample(const Dataset& ds, std::size_t target, Rng& rng) {
  const Column& col = ds.column(target);
  return draw_sample(ds, target, col.observed_rows(), col.missing_rows(), rng);
}

ImputationResult run(const Dataset& ds, const ImputationConfig& cfg) {
  if (cfg.n_imputations < 1) throw Error("mice", "n_imputations must be at least 1");
  if (cfg.n_iterations < 1) throw Error("mice", "n_iterations must be at least 1");

  std::vector<std::size_t> visit;
  if (cfg.visit_sequence.empty()) {
    for (std::size_t c = 0; c < ds.n_cols(); ++c)
      if (!ds.column(c).complete()) visit.push_back(c);
  } else {
    for (const auto& name : cfg.visit_sequence) visit.push_back(ds.index_of(name));
  }
  std::vector<Method> methods(ds.n_cols(), Method::RandomSample);
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    const Column& col = ds.column(c);
    if (col.complete()) continue;
    auto it = cfg.methods.find(col.name());
    if (it == cfg.methods.end())
      throw Error("mice", "no imputation method for incomplete column \"" + col.name() + "\"");
    if (it->second == Method::PMM && col.kind() != ColumnKind::Continuous)
      throw Error("mice", "PMM requires a continuous column, \"" + col.name() + "\" is categorical");
    methods[c] = it->second;
  }
  for (const auto& [name, _] : cfg.methods) ds.index_of(name);

  std::vector<std::vector<std::size_t>> observed(ds.n_cols());
  std::vector<std::vector<std::size_t>> missing(ds.n_cols());
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    observed[c] = ds.column(c).observed_rows();
    missing[c] = ds.column(c).missing_rows();
  }

  const std::size_t m = cfg.n_imputations;
  ImputationResult result;
  result.completed.resize(m);
  std::vector<std::vector<TraceEntry>> traces(m);
  std::vector<std::vector<StepRecord>> steps(m);

  parallel_for(m, cfg.threads, [&](std::size_t k) {
    Rng init_rng(derive_seed(cfg.rng_seed, {k, 0}));
    Dataset state = initialize_chain(ds, init_rng);
    for (std::size_t it = 0; it < cfg.n_iterations; ++it) {
      for (std::size_t c : visit) {
        if (missing[c].empty()) continue;
        Rng rng(derive_seed(cfg.rng_seed, {k, it + 1, c}));
        const ColumnDraw draw = draw_column(state, c, observed[c], missing[c], methods[c], cfg, rng);
        Column& col = state.mutable_column(c);
        double sum = 0;
        for (std::size_t i = 0; i < draw.rows.size(); ++i) {
          col.set(draw.rows[i], draw.values[i]);
          sum += draw.values[i];
        }
        traces[k].push_back({k, it, col.name(), sum / static_cast<double>(draw.rows.size())});
        steps[k].push_back({k, it, col.name(), draw.n_train, draw.n_excluded, draw.normal_fallback, draw.ridge});
      }
    }
    result.completed[k] = std::move(state);
  });

  for (std::size_t k = 0; k < m; ++k) {
    result.chain_means.insert(result.chain_means.end(), traces[k].begin(), traces[k].end());
    result.steps.insert(result.steps.end(), steps[k].begin(), steps[k].end());
  }
  return result;
}

}  // namespace rfimp
