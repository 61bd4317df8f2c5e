#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfimp/dataset.hpp"

namespace rfimp {

/// Least-squares fit of one response on an intercept plus predictors.
struct FitResult {
  std::vector<std::string> names;  // "(Intercept)" first
  std::vector<double> estimates;
  std::vector<double> standard_errors;
  std::size_t n = 0;
  std::size_t residual_df = 0;

  std::size_t index_of(std::string_view name) const;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double width() const noexcept { return high - low; }
  bool contains(double v) const noexcept { return low <= v && v <= high; }
};

/// OLS via column-pivoted Householder QR on rows observed in every used
/// column. Standard errors use RSS / (n - q). Throws on a rank-deficient
/// design or when n <= q.
FitResult fit_ols(const Dataset& ds, std::string_view response,
                  std::span<const std::string> predictors);

/// Y on X, Z and XZ.
FitResult fit_interaction_model(const Dataset& ds);

/// estimate +/- t(df, 1 - alpha/2) * se.
Interval t_interval(double estimate, double se, double df, double level = 0.95);
/// Two-sided t quantile; falls back to the normal quantile for infinite df.
double t_quantile(double df, double p);

struct PooledCoefficient {
  std::string name;
  double estimate = 0.0;  // mean of the m estimates
  double within = 0.0;    // mean squared standard error
  double between = 0.0;   // sample variance of the estimates
  double total = 0.0;     // within + (1 + 1/m) between
  double df = 0.0;        // Barnard-Rubin
  Interval ci;
};

struct PooledFit {
  std::size_t m = 0;
  std::vector<PooledCoefficient> coefficients;

  const PooledCoefficient& coefficient(std::string_view name) const;
};

/// Rubin's rules over m >= 2 fits sharing one coefficient set. The
/// complete-data degrees of freedom are taken from the fits' residual_df.
PooledFit pool(std::span<const FitResult> fits, double level = 0.95);

/// Barnard-Rubin adjusted degrees of freedom.
double barnard_rubin_df(std::size_t m, double within, double between, double complete_df);

}  // namespace rfimp
