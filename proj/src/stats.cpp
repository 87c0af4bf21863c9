// SPDX-License-Identifier: Apache-2.0
#include "rlready/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "rlready/error.hpp"
#include "rlready/random.hpp"

namespace rlready {

namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

void require_finite(double v, const std::string &what) {
  if (!std::isfinite(v)) {
    throw DomainError(what + " is not finite");
  }
}

} // namespace

LinearFit fit_linear(std::span<const LabeledPoint> points) {
  if (points.size() < 2) {
    throw DomainError("linear fit needs at least 2 points, got " + std::to_string(points.size()));
  }
  double xm = 0.0;
  double ym = 0.0;
  for (const auto &p : points) {
    require_finite(p.x, "x of " + p.checkpoint_id);
    require_finite(p.y, "y of " + p.checkpoint_id);
    xm += p.x;
    ym += p.y;
  }
  xm /= static_cast<double>(points.size());
  ym /= static_cast<double>(points.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto &p : points) {
    sxx += (p.x - xm) * (p.x - xm);
    sxy += (p.x - xm) * (p.y - ym);
  }
  const bool constant_x =
      std::all_of(points.begin(), points.end(), [&](const LabeledPoint &p) { return p.x == points.front().x; });
  if (constant_x || sxx == 0.0) {
    throw DomainError("degenerate fit: all x values are equal");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  return fit;
}

BivariateFit fit_bivariate(std::span<const double> x1, std::span<const double> x2, std::span<const double> y) {
  const std::size_t n = y.size();
  if (x1.size() != n || x2.size() != n) {
    throw DomainError("bivariate fit: feature and label lengths differ");
  }
  if (n < 3) {
    throw DomainError("bivariate fit needs at least 3 points, got " + std::to_string(n));
  }
  const double m1 = mean(x1);
  const double m2 = mean(x2);
  const double my = mean(y);
  double s11 = 0.0, s12 = 0.0, s22 = 0.0, s1y = 0.0, s2y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x1[i] - m1;
    const double b = x2[i] - m2;
    const double c = y[i] - my;
    s11 += a * a;
    s12 += a * b;
    s22 += b * b;
    s1y += a * c;
    s2y += b * c;
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 1e-12 * std::max(1.0, s11 * s22))) {
    throw DomainError("degenerate bivariate fit: features are collinear or constant");
  }
  BivariateFit fit;
  fit.w1 = (s22 * s1y - s12 * s2y) / det;
  fit.w2 = (s11 * s2y - s12 * s1y) / det;
  fit.intercept = my - fit.w1 * m1 - fit.w2 * m2;
  return fit;
}

double r_squared(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) {
    throw DomainError("r_squared: prediction and label lengths differ");
  }
  if (actual.size() < 2) {
    throw DomainError("r_squared needs at least 2 holdout points, got " + std::to_string(actual.size()));
  }
  if (all_equal(actual)) {
    throw DomainError("r_squared undefined: all holdout labels are equal");
  }
  const double ym = mean(actual);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - ym) * (actual[i] - ym);
  }
  return 1.0 - ss_res / ss_tot;
}

double r_squared(const LinearFit &fit, std::span<const LabeledPoint> holdout) {
  std::vector<double> predicted;
  std::vector<double> actual;
  predicted.reserve(holdout.size());
  actual.reserve(holdout.size());
  for (const auto &p : holdout) {
    predicted.push_back(fit(p.x));
    actual.push_back(p.y);
  }
  return r_squared(predicted, actual);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    // Positions i..j (0-based) share ranks i+1..j+1.
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      ranks[order[t]] = avg;
    }
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw DomainError("correlation: lengths differ (" + std::to_string(xs.size()) + " vs " +
                      std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) {
    throw DomainError("correlation needs at least 2 values");
  }
  if (all_equal(xs) || all_equal(ys)) {
    throw DomainError("correlation undefined for a constant list");
  }
  const double xm = mean(xs);
  const double ym = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - xm) * (ys[i] - ym);
    sxx += (xs[i] - xm) * (xs[i] - xm);
    syy += (ys[i] - ym) * (ys[i] - ym);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw DomainError("spearman: lengths differ (" + std::to_string(xs.size()) + " vs " +
                      std::to_string(ys.size()) + ")");
  }
  for (const double v : xs) {
    require_finite(v, "spearman input");
  }
  for (const double v : ys) {
    require_finite(v, "spearman input");
  }
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

std::vector<std::size_t> draw_fit_indices(std::size_t count, std::size_t n_fit, std::uint64_t seed,
                                          std::size_t repeat,
                                          const std::optional<std::vector<std::string>> &strata) {
  Rng rng = Rng::stream(seed, repeat);
  std::vector<std::size_t> chosen;
  if (!strata) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.partial_shuffle(idx, n_fit);
    chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_fit));
  } else {
    if (strata->size() != count) {
      throw DomainError("strata length differs from point count");
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < count; ++i) {
      groups[(*strata)[i]].push_back(i);
    }
    // Largest-remainder apportionment of n_fit over strata; ties go to the
    // stratum that sorts first.
    std::vector<std::pair<std::string, std::size_t>> quota;
    std::vector<std::pair<double, std::string>> remainders;
    std::size_t assigned = 0;
    for (const auto &[name, members] : groups) {
      const double exact = static_cast<double>(n_fit) * static_cast<double>(members.size()) /
                           static_cast<double>(count);
      const auto base = static_cast<std::size_t>(std::floor(exact));
      quota.emplace_back(name, base);
      remainders.emplace_back(exact - static_cast<double>(base), name);
      assigned += base;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n_fit && i < remainders.size(); ++i, ++assigned) {
      for (auto &q : quota) {
        if (q.first == remainders[i].second) {
          ++q.second;
        }
      }
    }
    for (const auto &[name, take] : quota) {
      auto members = groups[name];
      rng.partial_shuffle(members, take);
      chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

EvalProtocolResult repeated_split_eval(std::span<const double> ys, std::size_t n_fit, std::size_t repeats,
                                       std::uint64_t seed, const SplitPredictor &predictor,
                                       const SplitOptions &options) {
  const std::size_t count = ys.size();
  if (count < 4) {
    throw DomainError("split protocol needs at least 4 points, got " + std::to_string(count));
  }
  if (n_fit < 2 || n_fit + 2 > count) {
    throw DomainError("n_fit=" + std::to_string(n_fit) + " violates 2 <= n_fit <= " + std::to_string(count - 2));
  }
  if (repeats < 1) {
    throw DomainError("repeats must be at least 1");
  }

  std::vector<std::optional<double>> slots(repeats);
  auto run_repeat = [&](std::size_t r) {
    const auto fit_idx = draw_fit_indices(count, n_fit, seed, r, options.strata);
    std::vector<std::size_t> val_idx;
    val_idx.reserve(count - n_fit);
    for (std::size_t i = 0, j = 0; i < count; ++i) {
      if (j < fit_idx.size() && fit_idx[j] == i) {
        ++j;
      } else {
        val_idx.push_back(i);
      }
    }
    std::vector<double> actual;
    for (const auto i : val_idx) {
      actual.push_back(ys[i]);
    }
    if (all_equal(actual)) {
      return;
    }
    const auto predicted = predictor(fit_idx, val_idx);
    if (!predicted) {
      return;
    }
    slots[r] = r_squared(*predicted, actual);
  };

  const unsigned threads = std::min<std::size_t>(std::max(options.threads, 1u), repeats);
  if (threads <= 1) {
    for (std::size_t r = 0; r < repeats; ++r) {
      run_repeat(r);
    }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t r = t; r < repeats; r += threads) {
            run_repeat(r);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto &th : pool) {
      th.join();
    }
    for (const auto &e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
  }

  EvalProtocolResult out;
  out.n_fit = n_fit;
  out.n_val = count - n_fit;
  out.repeats = repeats;
  out.seed = seed;
  for (std::size_t r = 0; r < repeats; ++r) {
    if (slots[r]) {
      out.per_repeat_r2.push_back(*slots[r]);
    } else {
      out.skipped.push_back(r);
    }
  }
  if (out.per_repeat_r2.empty()) {
    throw DomainError("every repeat drew a degenerate split");
  }
  out.mean_r2 = mean(out.per_repeat_r2);
  const std::size_t m = out.per_repeat_r2.size();
  if (m > 1) {
    double ss = 0.0;
    for (const double v : out.per_repeat_r2) {
      ss += (v - out.mean_r2) * (v - out.mean_r2);
    }
    out.dispersion = std::sqrt(ss / static_cast<double>(m - 1));
  }
  out.std_error = out.dispersion / std::sqrt(static_cast<double>(m));
  return out;
}

EvalProtocolResult repeated_split_eval(std::span<const LabeledPoint> points, std::size_t n_fit, std::size_t repeats,
                                       std::uint64_t seed, const SplitOptions &options) {
  std::vector<double> ys;
  ys.reserve(points.size());
  for (const auto &p : points) {
    ys.push_back(p.y);
  }
  const SplitPredictor predictor = [&](std::span<const std::size_t> fit_idx,
                                       std::span<const std::size_t> val_idx) -> std::optional<std::vector<double>> {
    std::vector<LabeledPoint> fit_set;
    for (const auto i : fit_idx) {
      fit_set.push_back(points[i]);
    }
    const bool constant_x = std::all_of(fit_set.begin(), fit_set.end(),
                                        [&](const LabeledPoint &p) { return p.x == fit_set.front().x; });
    if (constant_x) {
      return std::nullopt;
    }
    const LinearFit fit = fit_linear(fit_set);
    std::vector<double> predicted;
    for (const auto i : val_idx) {
      predicted.push_back(fit(points[i].x));
    }
    return predicted;
  };
  return repeated_split_eval(ys, n_fit, repeats, seed, predictor, options);
}

std::map<std::string, double>
combine_predictions(std::span<const std::pair<std::string, LinearFit>> fits,
                    const std::map<std::string, std::map<std::string, double>> &features) {
  if (fits.empty()) {
    throw DomainError("combine_predictions needs at least one fit");
  }
  std::map<std::string, double> out;
  for (const auto &[checkpoint, metrics] : features) {
    double sum = 0.0;
    for (const auto &[metric, fit] : fits) {
      const auto it = metrics.find(metric);
      if (it == metrics.end()) {
        throw ValidationError("checkpoint " + checkpoint + " lacks feature " + metric);
      }
      sum += fit(it->second);
    }
    out[checkpoint] = sum / static_cast<double>(fits.size());
  }
  return out;
}

} // namespace rlready
