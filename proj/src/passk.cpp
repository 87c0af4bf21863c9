// SPDX-License-Identifier: Apache-2.0
#include "rlready/passk.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "rlready/error.hpp"

namespace rlready {

namespace {

void check_ks(std::span<const std::int64_t> ks) {
  if (ks.empty()) {
    throw DomainError("ks must not be empty");
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) {
      throw DomainError("k=" + std::to_string(ks[i]) + " is below 1");
    }
    if (i > 0 && ks[i] <= ks[i - 1]) {
      throw DomainError("ks must be strictly increasing (k=" + std::to_string(ks[i]) + " follows k=" +
                        std::to_string(ks[i - 1]) + ")");
    }
  }
}

std::string task_key(const TaskOutcome &o) {
  return o.checkpoint_id + "/" + o.benchmark_id + "/" + o.task_id;
}

} // namespace

std::optional<double> PassKCurve::at(std::int64_t k) const {
  const auto it = std::lower_bound(ks.begin(), ks.end(), k);
  if (it == ks.end() || *it != k) {
    return std::nullopt;
  }
  return values[static_cast<std::size_t>(it - ks.begin())];
}

const char *to_string(Aggregation agg) { return agg == Aggregation::Macro ? "macro" : "micro"; }

Aggregation parse_aggregation(const std::string &name) {
  if (name == "macro") {
    return Aggregation::Macro;
  }
  if (name == "micro") {
    return Aggregation::Micro;
  }
  throw ValidationError("unknown aggregation mode '" + name + "' (expected macro or micro)");
}

double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k) {
  if (n < 1) {
    throw DomainError("n=" + std::to_string(n) + " violates n >= 1");
  }
  if (c < 0 || c > n) {
    throw DomainError("c=" + std::to_string(c) + " violates 0 <= c <= n (n=" + std::to_string(n) + ")");
  }
  if (k < 1) {
    throw DomainError("k=" + std::to_string(k) + " violates k >= 1");
  }
  if (k > n) {
    throw DomainError("k=" + std::to_string(k) + " violates k <= n (n=" + std::to_string(n) + ")");
  }
  if (k == 1) {
    return static_cast<double>(c) / static_cast<double>(n);
  }
  if (n - c < k) {
    return 1.0;
  }
  // Probability that a k-subset holds no correct sample.
  double miss = 1.0;
  for (std::int64_t j = 0; j < k; ++j) {
    miss *= static_cast<double>(n - c - j) / static_cast<double>(n - j);
  }
  return 1.0 - miss;
}

PassKCurve pass_curve(const TaskOutcome &outcome, std::span<const std::int64_t> ks) {
  check_ks(ks);
  PassKCurve curve;
  curve.ks.assign(ks.begin(), ks.end());
  curve.values.reserve(ks.size());
  for (const auto k : ks) {
    if (k > outcome.n) {
      throw DomainError("k=" + std::to_string(k) + " exceeds n=" + std::to_string(outcome.n) + " for task " +
                        task_key(outcome));
    }
    curve.values.push_back(pass_at_k(outcome.n, outcome.c, k));
  }
  return curve;
}

CheckpointMetrics aggregate(std::span<const TaskOutcome> outcomes, std::span<const std::int64_t> ks,
                            Aggregation mode) {
  if (outcomes.empty()) {
    throw ValidationError("cannot aggregate an empty outcome set");
  }
  check_ks(ks);
  const std::int64_t k_max = ks.back();

  std::vector<const TaskOutcome *> sorted;
  sorted.reserve(outcomes.size());
  for (const auto &o : outcomes) {
    if (o.checkpoint_id != outcomes.front().checkpoint_id) {
      throw ValidationError("mixed checkpoint ids in one aggregation: '" + outcomes.front().checkpoint_id +
                            "' and '" + o.checkpoint_id + "'");
    }
    sorted.push_back(&o);
  }
  std::sort(sorted.begin(), sorted.end(), [](const TaskOutcome *a, const TaskOutcome *b) {
    return std::tie(a->benchmark_id, a->task_id) < std::tie(b->benchmark_id, b->task_id);
  });

  std::vector<std::string> short_tasks;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i]->benchmark_id == sorted[i - 1]->benchmark_id &&
        sorted[i]->task_id == sorted[i - 1]->task_id) {
      throw ValidationError("duplicate task " + task_key(*sorted[i]));
    }
    if (sorted[i]->n < k_max) {
      short_tasks.push_back(sorted[i]->task_id + " (n=" + std::to_string(sorted[i]->n) + ")");
    }
  }
  if (!short_tasks.empty()) {
    std::string msg = "tasks with n below max k=" + std::to_string(k_max) + ":";
    for (const auto &t : short_tasks) {
      msg += " " + t;
    }
    throw DomainError(msg);
  }

  CheckpointMetrics out;
  out.checkpoint_id = outcomes.front().checkpoint_id;
  out.task_count = sorted.size();
  out.n_min = sorted.front()->n;
  out.n_max = sorted.front()->n;

  const std::size_t nk = ks.size();
  std::vector<double> micro_sum(nk, 0.0);
  double micro_pass1 = 0.0;
  std::map<std::string, double> bench_pass1;

  std::size_t i = 0;
  while (i < sorted.size()) {
    const std::string &bench = sorted[i]->benchmark_id;
    std::vector<double> sum(nk, 0.0);
    double pass1_sum = 0.0;
    std::size_t count = 0;
    for (; i < sorted.size() && sorted[i]->benchmark_id == bench; ++i, ++count) {
      const TaskOutcome &o = *sorted[i];
      out.n_min = std::min(out.n_min, o.n);
      out.n_max = std::max(out.n_max, o.n);
      const PassKCurve curve = pass_curve(o, ks);
      for (std::size_t j = 0; j < nk; ++j) {
        sum[j] += curve.values[j];
        micro_sum[j] += curve.values[j];
      }
      const double p1 = pass_at_k(o.n, o.c, 1);
      pass1_sum += p1;
      micro_pass1 += p1;
    }
    PassKCurve bench_curve;
    bench_curve.ks.assign(ks.begin(), ks.end());
    for (std::size_t j = 0; j < nk; ++j) {
      bench_curve.values.push_back(sum[j] / static_cast<double>(count));
    }
    bench_pass1[bench] = pass1_sum / static_cast<double>(count);
    out.per_benchmark.emplace(bench, std::move(bench_curve));
  }

  out.passk.ks.assign(ks.begin(), ks.end());
  out.passk.values.assign(nk, 0.0);
  if (mode == Aggregation::Macro) {
    const auto nb = static_cast<double>(out.per_benchmark.size());
    for (const auto &[bench, curve] : out.per_benchmark) {
      for (std::size_t j = 0; j < nk; ++j) {
        out.passk.values[j] += curve.values[j];
      }
      out.pass1 += bench_pass1[bench];
    }
    for (auto &v : out.passk.values) {
      v /= nb;
    }
    out.pass1 /= nb;
  } else {
    const auto nt = static_cast<double>(sorted.size());
    for (std::size_t j = 0; j < nk; ++j) {
      out.passk.values[j] = micro_sum[j] / nt;
    }
    out.pass1 = micro_pass1 / nt;
  }
  return out;
}

std::vector<CheckpointMetrics> aggregate_all(std::span<const TaskOutcome> outcomes,
                                             std::span<const std::int64_t> ks, Aggregation mode) {
  std::map<std::string, std::vector<TaskOutcome>> groups;
  for (const auto &o : outcomes) {
    groups[o.checkpoint_id].push_back(o);
  }
  std::vector<CheckpointMetrics> out;
  out.reserve(groups.size());
  for (const auto &[id, group] : groups) {
    out.push_back(aggregate(group, ks, mode));
  }
  return out;
}

} // namespace rlready
