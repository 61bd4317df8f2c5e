#include "rfimp/error_distribution.hpp"

#include <cmath>

namespace rfimp {

ErrorDistribution::ErrorDistribution(std::vector<double> errors, std::size_t n_excluded)
    : errors_(std::move(errors)), n_excluded_(n_excluded) {
  if (errors_.empty()) return;
  double ss = 0;
  for (double e : errors_) ss += e * e;
  oob_mse_ = ss / static_cast<double>(errors_.size());
}

ErrorDistribution ErrorDistribution::build(const Forest& forest, const FeatureMatrix& x_train,
                                           std::span<const double> y_train) {
  if (forest.task() != Task::Regression)
    throw Error("errordist", "error distribution requires a regression forest");
  if (y_train.size() != forest.n_train() || x_train.n_rows() != forest.n_train())
    throw Error("errordist", "training data does not match the forest");
  std::vector<double> errors;
  errors.reserve(y_train.size());
  std::size_t excluded = 0;
  for (std::size_t r = 0; r < y_train.size(); ++r) {
    if (auto pred = forest.oob_predict(x_train, r))
      errors.push_back(y_train[r] - *pred);
    else
      ++excluded;
  }
  if (errors.empty()) throw EmptyOobPool();
  return ErrorDistribution(std::move(errors), excluded);
}

double ErrorDistribution::sample(Rng& rng) const {
  if (errors_.empty()) throw EmptyOobPool();
  return errors_[uniform_index(rng, errors_.size())];
}

double ErrorDistribution::sample_normal(Rng& rng) const {
  if (!std::isfinite(oob_mse_)) throw Error("errordist", "OOB MSE is not finite");
  if (oob_mse_ == 0.0) return 0.0;
  return std::sqrt(oob_mse_) * standard_normal(rng);
}

}  // namespace rfimp
