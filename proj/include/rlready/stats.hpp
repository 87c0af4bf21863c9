// SPDX-License-Identifier: Apache-2.0
//
// Predictor evaluation: least-squares calibration, held-out R^2, Spearman
// rank correlation, and the repeated random fit/validation split protocol.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rlready {

struct LabeledPoint {
  std::string checkpoint_id;
  double x = 0.0;
  double y = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
};

// y = w1 * x1 + w2 * x2 + intercept.
struct BivariateFit {
  double w1 = 0.0;
  double w2 = 0.0;
  double intercept = 0.0;

  double operator()(double x1, double x2) const { return w1 * x1 + w2 * x2 + intercept; }
};

struct EvalProtocolResult {
  // R^2 of every non-degenerate repeat, in repeat order.
  std::vector<double> per_repeat_r2;
  double mean_r2 = 0.0;
  // Sample standard deviation of per_repeat_r2 (0 for a single value).
  double dispersion = 0.0;
  // dispersion / sqrt(number of evaluated repeats).
  double std_error = 0.0;
  std::size_t n_fit = 0;
  std::size_t n_val = 0;
  // Requested repeat count; per_repeat_r2.size() + skipped.size() == repeats.
  std::size_t repeats = 0;
  // Repeat indices whose draw was degenerate (constant x in the fit set or
  // constant y in the holdout).
  std::vector<std::size_t> skipped;
  std::uint64_t seed = 0;

  friend bool operator==(const EvalProtocolResult &, const EvalProtocolResult &) = default;
};

struct SplitOptions {
  // Worker threads for the repeats; 0 or 1 runs serially. Results do not
  // depend on this value.
  unsigned threads = 1;
  // Optional stratum label per point. When set, every repeat draws from each
  // stratum in proportion to its size (largest-remainder rounding).
  std::optional<std::vector<std::string>> strata;
};

// Ordinary least squares. Throws DomainError for fewer than two points or
// when every x is equal.
LinearFit fit_linear(std::span<const LabeledPoint> points);

// Least squares on two features. Throws DomainError when the design is
// singular or has fewer than three points.
BivariateFit fit_bivariate(std::span<const double> x1, std::span<const double> x2, std::span<const double> y);

// 1 - SS_res / SS_tot on the holdout. Not clamped; may be negative.
double r_squared(const LinearFit &fit, std::span<const LabeledPoint> holdout);
double r_squared(std::span<const double> predicted, std::span<const double> actual);

// Fractional ranks starting at 1; tied values share their average rank.
std::vector<double> fractional_ranks(std::span<const double> values);

double pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson correlation of fractional ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

// Fits on a subset and predicts the complement. Receives indices into the
// point list; returns nullopt when the subset is degenerate for the model.
using SplitPredictor =
    std::function<std::optional<std::vector<double>>(std::span<const std::size_t> fit, std::span<const std::size_t> val)>;

// Repeated random split protocol over labels ys with an arbitrary predictor.
// Repeat r draws its fit set from an RNG stream derived from (seed, r).
EvalProtocolResult repeated_split_eval(std::span<const double> ys, std::size_t n_fit, std::size_t repeats,
                                       std::uint64_t seed, const SplitPredictor &predictor,
                                       const SplitOptions &options = {});

// The protocol with a single-metric linear predictor.
EvalProtocolResult repeated_split_eval(std::span<const LabeledPoint> points, std::size_t n_fit, std::size_t repeats,
                                       std::uint64_t seed, const SplitOptions &options = {});

// Index sets drawn for one repeat; exposed for inspection and tests.
std::vector<std::size_t> draw_fit_indices(std::size_t count, std::size_t n_fit, std::uint64_t seed,
                                          std::size_t repeat,
                                          const std::optional<std::vector<std::string>> &strata = std::nullopt);

// Unweighted mean of each fit's prediction per checkpoint.
// features: checkpoint id -> metric name -> x.
std::map<std::string, double>
combine_predictions(std::span<const std::pair<std::string, LinearFit>> fits,
                    const std::map<std::string, std::map<std::string, double>> &features);

} // namespace rlready
