#include "rfimp/regression.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "rfimp/error.hpp"

namespace rfimp {

std::size_t FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw Error("simstudy", "fit has no coefficient \"" + std::string(name) + "\"");
}

FitResult fit_ols(const Dataset& ds, std::string_view response,
                  std::span<const std::string> predictors) {
  std::vector<std::size_t> cols;
  for (const auto& p : predictors) cols.push_back(ds.index_of(p));
  const std::size_t yc = ds.index_of(response);
  for (std::size_t c : cols)
    if (ds.column(c).kind() != ColumnKind::Continuous)
      throw Error("simstudy", "OLS predictors must be continuous");

  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    bool ok = !ds.column(yc).is_missing(r);
    for (std::size_t c : cols) ok = ok && !ds.column(c).is_missing(r);
    if (ok) rows.push_back(r);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto q = static_cast<Eigen::Index>(cols.size() + 1);
  if (n <= q)
    throw Error("simstudy", "OLS needs more rows than coefficients (" + std::to_string(n) +
                                " rows, " + std::to_string(q) + " coefficients)");

  Eigen::MatrixXd x(n, q);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t r = rows[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    for (std::size_t j = 0; j < cols.size(); ++j)
      x(i, static_cast<Eigen::Index>(j) + 1) = ds.column(cols[j]).values()[r];
    y(i) = ds.column(yc).values()[r];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < q) throw Error("simstudy", "rank-deficient design matrix");
  const Eigen::VectorXd beta = qr.solve(y);
  const double rss = (y - x * beta).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - q);

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd cov = perm * (r_inv * r_inv.transpose()) * perm.transpose();

  FitResult fit;
  fit.n = static_cast<std::size_t>(n);
  fit.residual_df = static_cast<std::size_t>(n - q);
  fit.names.push_back("(Intercept)");
  fit.names.insert(fit.names.end(), predictors.begin(), predictors.end());
  for (Eigen::Index j = 0; j < q; ++j) {
    fit.estimates.push_back(beta(j));
    fit.standard_errors.push_back(std::sqrt(std::max(0.0, sigma2 * cov(j, j))));
  }
  return fit;
}

FitResult fit_interaction_model(const Dataset& ds) {
  static const std::vector<std::string> predictors{"X", "Z", "XZ"};
  return fit_ols(ds, "Y", predictors);
}

double t_quantile(double df, double p) {
  if (!(df > 0)) throw Error("simstudy", "t quantile needs positive degrees of freedom");
  if (std::isinf(df)) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

Interval t_interval(double estimate, double se, double df, double level) {
  const double half = t_quantile(df, 0.5 + level / 2) * se;
  return {estimate - half, estimate + half};
}

const PooledCoefficient& PooledFit::coefficient(std::string_view name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return c;
  throw Error("simstudy", "pooled fit has no coefficient \"" + std::string(name) + "\"");
}

double barnard_rubin_df(std::size_t m, double within, double between, double complete_df) {
  const double md = static_cast<double>(m);
  const double total = within + (1.0 + 1.0 / md) * between;
  const double lambda = total > 0 ? (1.0 + 1.0 / md) * between / total : 0.0;
  const double df_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
  if (lambda <= 0.0) return df_obs;
  const double df_old = (md - 1.0) / (lambda * lambda);
  if (df_obs <= 0.0) return df_old;
  return df_old * df_obs / (df_old + df_obs);
}

PooledFit pool(std::span<const FitResult> fits, double level) {
  const std::size_t m = fits.size();
  if (m < 2) throw Error("simstudy", "pooling needs at least two fits");
  const auto& names = fits.front().names;
  for (const auto& f : fits)
    if (f.names != names) throw Error("simstudy", "pooled fits have different coefficients");

  const double md = static_cast<double>(m);
  const auto complete_df = static_cast<double>(fits.front().residual_df);
  PooledFit out;
  out.m = m;
  for (std::size_t j = 0; j < names.size(); ++j) {
    PooledCoefficient c;
    c.name = names[j];
    for (const auto& f : fits) {
      c.estimate += f.estimates[j];
      c.within += f.standard_errors[j] * f.standard_errors[j];
    }
    c.estimate /= md;
    c.within /= md;
    for (const auto& f : fits) c.between += (f.estimates[j] - c.estimate) * (f.estimates[j] - c.estimate);
    c.between /= md - 1.0;
    c.total = c.within + (1.0 + 1.0 / md) * c.between;
    c.df = barnard_rubin_df(m, c.within, c.between, complete_df);
    if (c.total == 0.0)
      c.ci = {c.estimate, c.estimate};
    else
      c.ci = t_interval(c.estimate, std::sqrt(c.total), c.df, level);
    out.coefficients.push_back(std::move(c));
  }
  return out;
}

}  // namespace rfimp
