// SPDX-License-Identifier: Apache-2.0
#include "rlready/predict.hpp"

#include <algorithm>
#include <tuple>

#include "rlready/error.hpp"

namespace rlready {

namespace {

double loss_of(const Candidate &c) { return *c.metrics.gen_loss; }

std::vector<const Candidate *> labeled_sorted(std::span<const Candidate> candidates) {
  std::vector<const Candidate *> out;
  for (const auto &c : candidates) {
    if (c.post_rl_pass1) {
      out.push_back(&c);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Candidate *a, const Candidate *b) { return a->checkpoint_id < b->checkpoint_id; });
  return out;
}

const MetricSpec kGenLoss{MetricSpec::Kind::GenLoss, 0};

MetricSpec passk_part(const MetricSpec &avg) { return MetricSpec{MetricSpec::Kind::PassK, avg.k}; }

} // namespace

bool dominates(double pass1_b, double loss_b, double pass1_a, double loss_a, double margin) {
  return pass1_b >= pass1_a + margin && loss_b <= loss_a - margin && (pass1_b > pass1_a || loss_b < loss_a);
}

std::vector<RuledOut> pareto_rule_out(std::span<const Candidate> candidates, double margin) {
  if (candidates.empty()) {
    throw ValidationError("rule-out needs at least one candidate");
  }
  if (margin < 0.0) {
    throw ValidationError("dominance margin must be nonnegative");
  }
  std::string missing;
  for (const auto &c : candidates) {
    if (!c.metrics.gen_loss) {
      missing += (missing.empty() ? "" : ", ") + c.checkpoint_id;
    }
  }
  if (!missing.empty()) {
    throw ValidationError("generalization loss missing for: " + missing);
  }

  std::vector<RuledOut> out;
  for (const auto &a : candidates) {
    const Candidate *best = nullptr;
    for (const auto &b : candidates) {
      if (!dominates(b.metrics.pass1, loss_of(b), a.metrics.pass1, loss_of(a), margin)) {
        continue;
      }
      if (best == nullptr || std::make_tuple(-b.metrics.pass1, loss_of(b), b.checkpoint_id) <
                                 std::make_tuple(-best->metrics.pass1, loss_of(*best), best->checkpoint_id)) {
        best = &b;
      }
    }
    if (best != nullptr) {
      out.push_back({a.checkpoint_id, best->checkpoint_id});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const RuledOut &x, const RuledOut &y) { return x.checkpoint_id < y.checkpoint_id; });
  return out;
}

std::vector<RankedEntry> rank_by_passk(std::span<const Candidate> candidates, std::int64_t k) {
  std::vector<RankedEntry> out;
  out.reserve(candidates.size());
  for (const auto &c : candidates) {
    const auto v = c.metrics.passk.at(k);
    if (!v) {
      throw ValidationError("checkpoint " + c.checkpoint_id + " has no Pass@" + std::to_string(k) + " value");
    }
    out.push_back({c.checkpoint_id, *v});
  }
  std::sort(out.begin(), out.end(), [](const RankedEntry &a, const RankedEntry &b) {
    if (a.value != b.value) {
      return a.value > b.value;
    }
    return a.checkpoint_id < b.checkpoint_id;
  });
  return out;
}

RankingReport rank_candidates(std::span<const Candidate> candidates, std::int64_t k, double margin,
                              bool require_gen_loss) {
  RankingReport report;
  report.k_used = k;
  const bool have_loss = std::all_of(candidates.begin(), candidates.end(),
                                     [](const Candidate &c) { return c.metrics.gen_loss.has_value(); });
  std::vector<Candidate> survivors;
  if (have_loss || require_gen_loss) {
    report.ruled_out = pareto_rule_out(candidates, margin);
    for (const auto &c : candidates) {
      const bool out = std::any_of(report.ruled_out.begin(), report.ruled_out.end(),
                                   [&](const RuledOut &r) { return r.checkpoint_id == c.checkpoint_id; });
      if (!out) {
        survivors.push_back(c);
      }
    }
  } else {
    report.warning = "generalization loss unavailable; rule-out stage skipped";
    survivors.assign(candidates.begin(), candidates.end());
  }
  report.ranked = rank_by_passk(survivors, k);
  return report;
}

MetricSpec MetricSpec::parse(const std::string &text) {
  auto parse_k = [&](const std::string &digits) {
    std::size_t used = 0;
    long long k = 0;
    try {
      k = std::stoll(digits, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != digits.size() || k < 1) {
      throw ValidationError("invalid k in metric '" + text + "'");
    }
    return static_cast<std::int64_t>(k);
  };
  if (text == "pass1") {
    return {Kind::Pass1, 1};
  }
  if (text == "genloss") {
    return {Kind::GenLoss, 0};
  }
  if (text.rfind("passk:", 0) == 0) {
    return {Kind::PassK, parse_k(text.substr(6))};
  }
  static const std::string kAvgPrefix = "avg:passk:";
  static const std::string kAvgSuffix = "+genloss";
  if (text.rfind(kAvgPrefix, 0) == 0 && text.size() > kAvgPrefix.size() + kAvgSuffix.size() &&
      text.compare(text.size() - kAvgSuffix.size(), kAvgSuffix.size(), kAvgSuffix) == 0) {
    return {Kind::AvgPassKGenLoss,
            parse_k(text.substr(kAvgPrefix.size(), text.size() - kAvgPrefix.size() - kAvgSuffix.size()))};
  }
  throw ValidationError("unknown metric '" + text + "' (expected pass1, passk:K, genloss or avg:passk:K+genloss)");
}

std::string MetricSpec::name() const {
  switch (kind) {
  case Kind::Pass1:
    return "pass1";
  case Kind::PassK:
    return "passk:" + std::to_string(k);
  case Kind::GenLoss:
    return "genloss";
  case Kind::AvgPassKGenLoss:
    return "avg:passk:" + std::to_string(k) + "+genloss";
  }
  return {};
}

double feature(const Candidate &candidate, const MetricSpec &metric) {
  switch (metric.kind) {
  case MetricSpec::Kind::Pass1:
    return candidate.metrics.pass1;
  case MetricSpec::Kind::PassK: {
    const auto v = candidate.metrics.passk.at(metric.k);
    if (!v) {
      throw ValidationError("checkpoint " + candidate.checkpoint_id + " has no Pass@" + std::to_string(metric.k) +
                            " value");
    }
    return *v;
  }
  case MetricSpec::Kind::GenLoss:
    if (!candidate.metrics.gen_loss) {
      throw ValidationError("checkpoint " + candidate.checkpoint_id + " has no generalization loss");
    }
    return *candidate.metrics.gen_loss;
  case MetricSpec::Kind::AvgPassKGenLoss:
    break;
  }
  throw ValidationError("metric " + metric.name() + " is not a single feature");
}

namespace {

std::vector<LabeledPoint> points_for(std::span<const Candidate *const> labeled, const MetricSpec &metric) {
  std::vector<LabeledPoint> points;
  points.reserve(labeled.size());
  for (const Candidate *c : labeled) {
    points.push_back({c->checkpoint_id, feature(*c, metric), *c->post_rl_pass1});
  }
  return points;
}

void check_labels(std::span<const Candidate *const> labeled) {
  if (labeled.size() < 2) {
    throw ValidationError("calibration needs at least 2 labeled candidates, got " + std::to_string(labeled.size()));
  }
  for (const Candidate *c : labeled) {
    const double y = *c->post_rl_pass1;
    if (!(y >= 0.0 && y <= 1.0)) {
      throw ValidationError("post-RL Pass@1 of " + c->checkpoint_id + " is outside [0,1]");
    }
  }
}

} // namespace

std::map<std::string, double> calibrate_and_predict(std::span<const Candidate> candidates, const MetricSpec &metric,
                                                    Combine combine) {
  const auto labeled = labeled_sorted(candidates);
  check_labels(labeled);

  std::map<std::string, double> out;
  if (metric.kind != MetricSpec::Kind::AvgPassKGenLoss) {
    const LinearFit fit = fit_linear(points_for(labeled, metric));
    for (const auto &c : candidates) {
      out[c.checkpoint_id] = fit(feature(c, metric));
    }
    return out;
  }

  const MetricSpec pk = passk_part(metric);
  if (combine == Combine::Bivariate) {
    std::vector<double> x1, x2, y;
    for (const Candidate *c : labeled) {
      x1.push_back(feature(*c, pk));
      x2.push_back(feature(*c, kGenLoss));
      y.push_back(*c->post_rl_pass1);
    }
    const BivariateFit fit = fit_bivariate(x1, x2, y);
    for (const auto &c : candidates) {
      out[c.checkpoint_id] = fit(feature(c, pk), feature(c, kGenLoss));
    }
    return out;
  }

  const std::vector<std::pair<std::string, LinearFit>> fits{
      {pk.name(), fit_linear(points_for(labeled, pk))},
      {kGenLoss.name(), fit_linear(points_for(labeled, kGenLoss))},
  };
  std::map<std::string, std::map<std::string, double>> features;
  for (const auto &c : candidates) {
    features[c.checkpoint_id] = {{pk.name(), feature(c, pk)}, {kGenLoss.name(), feature(c, kGenLoss)}};
  }
  return combine_predictions(fits, features);
}

EvalProtocolResult evaluate_metric(std::span<const Candidate> candidates, const MetricSpec &metric,
                                   std::size_t n_fit, std::size_t repeats, std::uint64_t seed,
                                   const SplitOptions &options, Combine combine) {
  const auto labeled = labeled_sorted(candidates);
  if (metric.kind != MetricSpec::Kind::AvgPassKGenLoss) {
    return repeated_split_eval(points_for(labeled, metric), n_fit, repeats, seed, options);
  }

  const MetricSpec pk = passk_part(metric);
  const auto p1 = points_for(labeled, pk);
  const auto p2 = points_for(labeled, kGenLoss);
  std::vector<double> ys;
  for (const auto &p : p1) {
    ys.push_back(p.y);
  }
  const SplitPredictor predictor = [&](std::span<const std::size_t> fit_idx,
                                       std::span<const std::size_t> val_idx) -> std::optional<std::vector<double>> {
    std::vector<LabeledPoint> f1, f2;
    for (const auto i : fit_idx) {
      f1.push_back(p1[i]);
      f2.push_back(p2[i]);
    }
    std::vector<double> predicted;
    try {
      if (combine == Combine::Bivariate) {
        std::vector<double> a, b, y;
        for (std::size_t j = 0; j < f1.size(); ++j) {
          a.push_back(f1[j].x);
          b.push_back(f2[j].x);
          y.push_back(f1[j].y);
        }
        const BivariateFit fit = fit_bivariate(a, b, y);
        for (const auto i : val_idx) {
          predicted.push_back(fit(p1[i].x, p2[i].x));
        }
      } else {
        const LinearFit g1 = fit_linear(f1);
        const LinearFit g2 = fit_linear(f2);
        for (const auto i : val_idx) {
          predicted.push_back((g1(p1[i].x) + g2(p2[i].x)) / 2.0);
        }
      }
    } catch (const DomainError &) {
      return std::nullopt;
    }
    return predicted;
  };
  return repeated_split_eval(ys, n_fit, repeats, seed, predictor, options);
}

} // namespace rlready
