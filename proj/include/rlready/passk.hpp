// SPDX-License-Identifier: Apache-2.0
//
// Unbiased Pass@k estimation from (n, c) outcome counts and aggregation of
// per-task estimates into per-checkpoint metrics.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rlready {

// Outcome of sampling one task: n completions were drawn, c were correct.
struct TaskOutcome {
  std::string checkpoint_id;
  std::string benchmark_id;
  std::string task_id;
  std::int64_t n = 0;
  std::int64_t c = 0;

  friend bool operator==(const TaskOutcome &, const TaskOutcome &) = default;
};

struct PassKCurve {
  std::vector<std::int64_t> ks;
  std::vector<double> values;

  // Value at k, or nullopt when k is not on the curve.
  std::optional<double> at(std::int64_t k) const;

  friend bool operator==(const PassKCurve &, const PassKCurve &) = default;
};

enum class Aggregation {
  // Mean over benchmarks of the per-benchmark task mean.
  Macro,
  // Mean over all tasks regardless of benchmark.
  Micro,
};

const char *to_string(Aggregation agg);
Aggregation parse_aggregation(const std::string &name);

struct CheckpointMetrics {
  std::string checkpoint_id;
  double pass1 = 0.0;
  PassKCurve passk;
  std::optional<double> gen_loss;
  std::map<std::string, PassKCurve> per_benchmark;
  // Smallest and largest sample count seen across the checkpoint's tasks.
  std::int64_t n_min = 0;
  std::int64_t n_max = 0;
  std::size_t task_count = 0;
};

// 1 - C(n-c, k) / C(n, k), evaluated as a running product of ratios that
// never exceed one. Throws DomainError unless 1 <= k <= n and 0 <= c <= n.
double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k);

// Pass@k at every k of a strictly increasing list.
PassKCurve pass_curve(const TaskOutcome &outcome, std::span<const std::int64_t> ks);

// Aggregates one checkpoint's task outcomes. Summation runs over tasks
// sorted by (benchmark, task), so the result is independent of input order.
CheckpointMetrics aggregate(std::span<const TaskOutcome> outcomes, std::span<const std::int64_t> ks,
                            Aggregation mode = Aggregation::Macro);

// Groups outcomes by checkpoint and aggregates each group; sorted by id.
std::vector<CheckpointMetrics> aggregate_all(std::span<const TaskOutcome> outcomes,
                                             std::span<const std::int64_t> ks,
                                             Aggregation mode = Aggregation::Macro);

} // namespace rlready
