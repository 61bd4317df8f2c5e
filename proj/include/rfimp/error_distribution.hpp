#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rfimp/error.hpp"
#include "rfimp/forest.hpp"
#include "rfimp/random.hpp"

namespace rfimp {

/// Thrown by ErrorDistribution::build when every training row is in bag for
/// every tree, so no out-of-bag error exists.
class EmptyOobPool : public Error {
 public:
  EmptyOobPool() : Error("errordist", "empty OOB pool") {}
};

/// Pool of out-of-bag prediction errors (observed minus OOB prediction) of a
/// regression forest, in training-row order. Errors are used raw: no
/// centring, no symmetrisation.
class ErrorDistribution {
 public:
  ErrorDistribution() = default;
  ErrorDistribution(std::vector<double> errors, std::size_t n_excluded);

  static ErrorDistribution build(const Forest& forest, const FeatureMatrix& x_train,
                                 std::span<const double> y_train);

  std::span<const double> errors() const noexcept { return errors_; }
  std::size_t size() const noexcept { return errors_.size(); }
  bool empty() const noexcept { return errors_.empty(); }
  std::size_t n_excluded() const noexcept { return n_excluded_; }
  double oob_mse() const noexcept { return oob_mse_; }

  /// One pool element drawn uniformly with replacement.
  double sample(Rng& rng) const;
  /// Draw from Normal(0, oob_mse).
  double sample_normal(Rng& rng) const;

 private:
  std::vector<double> errors_;
  std::size_t n_excluded_ = 0;
  double oob_mse_ = 0.0;
};

}  // namespace rfimp
