#include "rfimp/ampute.hpp"

#include <algorithm>
#include <cmath>

#include "rfimp/error.hpp"

namespace rfimp {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double mean_probability(std::span<const double> z, double shift) {
  double s = 0;
  for (double v : z) s += logistic(v + shift);
  return s / static_cast<double>(z.size());
}

}  // namespace

std::string_view mechanism_name(Mechanism m) noexcept {
  return m == Mechanism::MCAR ? "mcar" : "mar-right";
}

Mechanism parse_mechanism(std::string_view name) {
  if (name == "mcar") return Mechanism::MCAR;
  if (name == "mar-right" || name == "mar") return Mechanism::MAR_right;
  throw Error("ampute", "unknown mechanism \"" + std::string(name) + "\"");
}

MarProbabilities mar_right_probabilities(std::span<const double> weights, double prop) {
  if (!(prop > 0.0 && prop < 1.0)) throw Error("ampute", "prop must lie in (0, 1)");
  const std::size_t n = weights.size();
  if (n < 2) throw Error("ampute", "MAR amputation needs at least two rows");
  double mean = 0;
  for (double w : weights) mean += w;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double w : weights) ss += (w - mean) * (w - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error("ampute", "weight column is constant; cannot standardise");

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (weights[i] - mean) / sd;

  // mean_probability is increasing in the shift.
  double lo = -60.0;
  double hi = 60.0;
  double shift = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    shift = lo + (hi - lo) / 2;
    const double f = mean_probability(z, shift) - prop;
    if (std::abs(f) < 1e-9) break;
    (f < 0 ? lo : hi) = shift;
  }
  MarProbabilities out;
  out.shift = shift;
  out.probabilities.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.probabilities[i] = logistic(z[i] + shift);
  return out;
}

std::vector<std::vector<std::string>> mixed_patterns(const std::vector<std::string>& columns) {
  std::vector<std::vector<std::string>> out;
  for (const auto& c : columns) out.push_back({c});
  if (columns.size() > 1) out.push_back(columns);
  return out;
}

Dataset ampute(const Dataset& ds, const AmputeConfig& cfg, Rng& rng) {
  if (cfg.pattern_columns.empty()) throw Error("ampute", "no pattern columns given");
  if (!(cfg.prop > 0.0 && cfg.prop < 1.0)) throw Error("ampute", "prop must lie in (0, 1)");
  std::vector<std::size_t> pattern;
  for (const auto& name : cfg.pattern_columns) {
    const std::size_t c = ds.index_of(name);
    if (!ds.column(c).complete())
      throw Error("ampute", "pattern column \"" + name + "\" already has missing cells");
    pattern.push_back(c);
  }
  std::vector<std::vector<std::size_t>> patterns;
  for (const auto& set : cfg.patterns) {
    if (set.empty()) throw Error("ampute", "empty missingness pattern");
    std::vector<std::size_t> cols;
    for (const auto& name : set) {
      const std::size_t c = ds.index_of(name);
      if (std::find(pattern.begin(), pattern.end(), c) == pattern.end())
        throw Error("ampute", "pattern column \"" + name + "\" is not in pattern_columns");
      cols.push_back(c);
    }
    patterns.push_back(std::move(cols));
  }
  if (patterns.empty()) patterns.push_back(pattern);

  const std::size_t n = ds.n_rows();
  std::vector<double> p(n, cfg.prop);
  if (cfg.mechanism == Mechanism::MAR_right) {
    const std::size_t w = ds.index_of(cfg.weight_column);
    if (std::find(pattern.begin(), pattern.end(), w) != pattern.end())
      throw Error("ampute", "weight column cannot be amputed itself");
    const Column& wc = ds.column(w);
    if (wc.kind() != ColumnKind::Continuous || !wc.complete())
      throw Error("ampute", "weight column must be continuous and complete");
    p = mar_right_probabilities(wc.values(), cfg.prop).probabilities;
  }

  Dataset out = ds;
  for (std::size_t r = 0; r < n; ++r) {
    if (uniform01(rng) >= p[r]) continue;
    const auto& chosen = patterns.size() == 1 ? patterns.front() : patterns[uniform_index(rng, patterns.size())];
    for (std::size_t c : chosen) out.mutable_column(c).set_missing(r);
  }
  return out;
}

Dataset ampute(const Dataset& ds, const AmputeConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return ampute(ds, cfg, rng);
}

}  // namespace rfimp
