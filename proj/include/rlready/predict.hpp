// SPDX-License-Identifier: Apache-2.0
//
// Candidate selection workflows: Pareto rule-out on (Pass@1, generalization
// loss), ranking by Pass@large-k, and calibrated value prediction.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlready/passk.hpp"
#include "rlready/stats.hpp"

namespace rlready {

struct Candidate {
  std::string checkpoint_id;
  CheckpointMetrics metrics;
  std::optional<double> post_rl_pass1;
};

struct RuledOut {
  std::string checkpoint_id;
  std::string dominated_by;

  friend bool operator==(const RuledOut &, const RuledOut &) = default;
};

struct RankedEntry {
  std::string checkpoint_id;
  double value = 0.0;

  friend bool operator==(const RankedEntry &, const RankedEntry &) = default;
};

struct RankingReport {
  std::vector<RuledOut> ruled_out;
  std::vector<RankedEntry> ranked;
  std::int64_t k_used = 0;
  // Set when the rule-out stage did not run.
  std::optional<std::string> warning;
};

// True when b dominates a: pass1(b) >= pass1(a) + margin and
// loss(b) <= loss(a) - margin with at least one strict inequality.
bool dominates(double pass1_b, double loss_b, double pass1_a, double loss_a, double margin = 0.0);

// Candidates dominated by another candidate, sorted by id. The named
// dominator is the one with the highest Pass@1, then lowest loss, then
// smallest id, which always lies on the frontier.
std::vector<RuledOut> pareto_rule_out(std::span<const Candidate> candidates, double margin = 0.0);

// Descending Pass@k, ties by checkpoint id ascending.
std::vector<RankedEntry> rank_by_passk(std::span<const Candidate> candidates, std::int64_t k);

// Rule-out followed by ranking of the survivors. When any candidate lacks
// gen_loss and require_gen_loss is false, the rule-out is skipped and a
// warning is recorded.
RankingReport rank_candidates(std::span<const Candidate> candidates, std::int64_t k, double margin = 0.0,
                              bool require_gen_loss = false);

struct MetricSpec {
  enum class Kind { Pass1, PassK, GenLoss, AvgPassKGenLoss };
  Kind kind = Kind::Pass1;
  std::int64_t k = 1;

  // "pass1", "passk:K", "genloss", "avg:passk:K+genloss".
  static MetricSpec parse(const std::string &text);
  std::string name() const;
};

// How the avg metric turns two features into one prediction.
enum class Combine {
  // Mean of two independently fitted single-feature predictions.
  Mean,
  // One least-squares fit on both features.
  Bivariate,
};

// Feature value of a single-feature metric for one candidate.
double feature(const Candidate &candidate, const MetricSpec &metric);

// Fits on the labeled candidates and predicts every candidate.
std::map<std::string, double> calibrate_and_predict(std::span<const Candidate> candidates, const MetricSpec &metric,
                                                    Combine combine = Combine::Mean);

// Split-protocol R^2 for a metric over the labeled candidates, sorted by id.
EvalProtocolResult evaluate_metric(std::span<const Candidate> candidates, const MetricSpec &metric,
                                   std::size_t n_fit, std::size_t repeats, std::uint64_t seed,
                                   const SplitOptions &options = {}, Combine combine = Combine::Mean);

} // namespace rlready
