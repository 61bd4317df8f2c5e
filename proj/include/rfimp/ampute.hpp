#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfimp/dataset.hpp"
#include "rfimp/random.hpp"

namespace rfimp {

enum class Mechanism { MCAR, MAR_right };

std::string_view mechanism_name(Mechanism m) noexcept;
/// "mcar" or "mar-right".
Mechanism parse_mechanism(std::string_view name);

struct AmputeConfig {
  std::vector<std::string> pattern_columns;  // set missing together on incomplete rows
  /// Optional alternative to the joint pattern: each incomplete row takes one
  /// of these column sets, chosen with equal probability. Every set must be
  /// a non-empty subset of pattern_columns.
  std::vector<std::vector<std::string>> patterns;
  double prop = 0.5;
  Mechanism mechanism = Mechanism::MCAR;
  std::string weight_column;  // MAR_right only
  std::uint64_t rng_seed = 0;
};

/// Per-row missingness probabilities logistic(z_i + shift), z the
/// standardised weights, with shift found by bisection so that the mean
/// probability equals `prop` to within 1e-6.
struct MarProbabilities {
  std::vector<double> probabilities;
  double shift = 0.0;
};
/// Each column alone plus all columns jointly: {a}, {b}, {a, b} for two.
std::vector<std::vector<std::string>> mixed_patterns(const std::vector<std::string>& columns);

MarProbabilities mar_right_probabilities(std::span<const double> weights, double prop);

Dataset ampute(const Dataset& ds, const AmputeConfig& cfg, Rng& rng);
/// Uses a generator seeded from cfg.rng_seed.
Dataset ampute(const Dataset& ds, const AmputeConfig& cfg);

}  // namespace rfimp
