// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "rlready/curate.hpp"
#include "rlready/error.hpp"
#include "rlready/passk.hpp"
#include "rlready/predict.hpp"
#include "rlready/records.hpp"
#include "rlready/report.hpp"
#include "rlready/sampler.hpp"
#include "rlready/stats.hpp"
#include "rlready/store.hpp"
#include "rlready/verifier.hpp"

namespace rlready::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  std::string command_line;
  std::ostream &out;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::vector<std::int64_t> parse_ks(const std::string &text) {
  std::vector<std::int64_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long k = std::stoll(item, &used);
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
      ks.push_back(k);
    } catch (const std::exception &) {
      throw ValidationError("--ks: '" + item + "' is not an integer");
    }
  }
  if (ks.empty()) {
    throw ValidationError("--ks must list at least one k");
  }
  return ks;
}

// Writes text to path, or to the context stream when path is "-".
void emit(Context &ctx, const std::string &path, const std::string &text) {
  if (path == "-") {
    ctx.out << text;
    return;
  }
  write_text_file(path, text);
}

void emit_json(Context &ctx, const std::string &path, const json &doc) { emit(ctx, path, doc.dump(2) + "\n"); }

// CSV outputs carry their provenance in a <path>.meta.json sidecar.
void emit_csv(Context &ctx, const std::string &path, const CsvTable &table, const ReportMetadata &meta) {
  emit(ctx, path, table.to_csv());
  if (path != "-") {
    write_text_file(path + ".meta.json", meta.to_json().dump(2) + "\n");
  }
}

ReportMetadata base_metadata(const Context &ctx) {
  ReportMetadata meta;
  meta.command = ctx.command_line;
  meta.verifier_rules = kVerifierRulesVersion;
  return meta;
}

std::map<std::string, double> genloss_by_checkpoint(const std::vector<GenLossRecord> &records, GenLossMode mode) {
  std::map<std::string, std::vector<GenLossRecord>> groups;
  for (const auto &r : records) {
    groups[r.checkpoint_id].push_back(r);
  }
  std::map<std::string, double> out;
  for (const auto &[id, group] : groups) {
    out[id] = aggregate_genloss(group, mode);
  }
  return out;
}

struct CandidateInputs {
  std::string metrics;
  std::string labels;
  std::string genloss;
  std::string genloss_mode = "token_weighted";
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::map<std::string, std::string> groups;
  std::vector<std::int64_t> ks;
};

CandidateSet load_candidates(const CandidateInputs &in, ReportMetadata &meta) {
  add_input_hash(meta, in.metrics);
  const auto metrics = parse_metrics_table(CsvTable::parse(read_text_file(in.metrics), in.metrics));
  if (metrics.empty()) {
    throw ValidationError(in.metrics + ": no checkpoints");
  }
  CandidateSet set;
  set.ks = metrics.front().passk.ks;
  std::map<std::string, std::size_t> index;
  for (const auto &m : metrics) {
    index[m.checkpoint_id] = set.candidates.size();
    set.candidates.push_back({m.checkpoint_id, m, std::nullopt});
  }
  if (!in.genloss.empty()) {
    add_input_hash(meta, in.genloss);
    const auto mode = parse_genloss_mode(in.genloss_mode);
    meta.extra["genloss_mode"] = to_string(mode);
    for (const auto &[id, loss] : genloss_by_checkpoint(load_genloss(in.genloss), mode)) {
      const auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationError(in.genloss + ": checkpoint " + id + " is not in the metrics table");
      }
      set.candidates[it->second].metrics.gen_loss = loss;
    }
  }
  if (!in.labels.empty()) {
    add_input_hash(meta, in.labels);
    for (const auto &l : load_labels(in.labels)) {
      const auto it = index.find(l.checkpoint_id);
      if (it == index.end()) {
        throw ValidationError(in.labels + ": checkpoint " + l.checkpoint_id + " is not in the metrics table");
      }
      set.candidates[it->second].post_rl_pass1 = l.post_rl_pass1;
      if (!l.group.empty()) {
        set.groups[l.checkpoint_id] = l.group;
      }
    }
  }
  return set;
}

json protocol_json(const EvalProtocolResult &r) {
  return {{"per_repeat_r2", r.per_repeat_r2}, {"mean_r2", r.mean_r2},   {"sd", r.dispersion},
          {"std_error", r.std_error},         {"n_fit", r.n_fit},        {"n_val", r.n_val},
          {"repeats", r.repeats},             {"skipped", r.skipped},    {"seed", r.seed}};
}

Combine parse_combine(const std::string &s) {
  if (s == "mean") {
    return Combine::Mean;
  }
  if (s == "bivariate") {
    return Combine::Bivariate;
  }
  throw ValidationError("unknown --combine '" + s + "' (expected mean or bivariate)");
}

std::vector<LabeledPoint> labeled_points(const std::vector<Candidate> &candidates, const MetricSpec &metric) {
  std::vector<LabeledPoint> points;
  for (const auto &c : candidates) {
    if (c.post_rl_pass1) {
      points.push_back({c.checkpoint_id, feature(c, metric), *c.post_rl_pass1});
    }
  }
  std::sort(points.begin(), points.end(),
            [](const LabeledPoint &a, const LabeledPoint &b) { return a.checkpoint_id < b.checkpoint_id; });
  return points;
}

std::string axis_label(const MetricSpec &m) {
  switch (m.kind) {
  case MetricSpec::Kind::Pass1:
    return "post-SFT Pass@1";
  case MetricSpec::Kind::PassK:
    return "post-SFT Pass@" + std::to_string(m.k);
  case MetricSpec::Kind::GenLoss:
    return "generalization loss";
  case MetricSpec::Kind::AvgPassKGenLoss:
    return "combined prediction";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CollectArgs {
  std::string config;
};

void cmd_collect(Context &ctx, const CollectArgs &a) {
  JobConfig cfg = load_job_config(a.config);
  RecordStore store(cfg.store_root);
  store.set_meta("tool_version", kToolVersion);
  store.set_meta("checkpoint_id", cfg.job.effective_checkpoint_id());
  const std::size_t written = sample_completions(cfg.job, store, cfg.options);
  ctx.out << json{{"written", written}, {"store", cfg.store_root.string()}}.dump() << "\n";
}

struct VerifyArgs {
  std::string samples;
  std::string gold;
  std::string out;
};

void cmd_verify(Context &ctx, const VerifyArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  add_input_hash(meta, a.samples);
  add_input_hash(meta, a.gold);
  const auto samples = load_samples(a.samples);
  const auto gold = load_gold(a.gold);
  std::map<std::pair<std::string, std::string>, const GoldAnswer *> gold_index;
  for (const auto &g : gold) {
    gold_index[{g.benchmark_id, g.task_id}] = &g;
  }
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<Sample>> groups;
  for (const auto &s : samples) {
    groups[{s.checkpoint_id, s.benchmark_id, s.task_id}].push_back(s);
  }
  std::vector<TaskOutcome> outcomes;
  for (const auto &[key, group] : groups) {
    const auto it = gold_index.find({std::get<1>(key), std::get<2>(key)});
    if (it == gold_index.end()) {
      throw ValidationError("no gold answer for " + std::get<1>(key) + "/" + std::get<2>(key));
    }
    outcomes.push_back(score(group, *it->second));
  }
  std::string text;
  for (const auto &o : outcomes) {
    text += to_jsonl_line(o) + "\n";
  }
  emit(ctx, a.out, text);
  if (a.out != "-") {
    write_text_file(a.out + ".meta.json", meta.to_json().dump(2) + "\n");
  }
}

struct PasskArgs {
  std::string outcomes;
  std::string ks = "1,64";
  std::string agg = "macro";
  std::string out;
};

void cmd_passk(Context &ctx, const PasskArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  add_input_hash(meta, a.outcomes);
  const auto ks = parse_ks(a.ks);
  const auto mode = parse_aggregation(a.agg);
  meta.aggregation = to_string(mode);
  meta.extra["ks"] = ks;
  const auto outcomes = load_outcomes(a.outcomes);
  const auto metrics = aggregate_all(outcomes, ks, mode);
  emit_csv(ctx, a.out, metrics_table(metrics), meta);
}

struct GenlossArgs {
  std::string genloss;
  std::string mode = "token_weighted";
  std::string out;
};

void cmd_genloss(Context &ctx, const GenlossArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  add_input_hash(meta, a.genloss);
  const auto mode = parse_genloss_mode(a.mode);
  meta.extra["genloss_mode"] = to_string(mode);
  const auto records = load_genloss(a.genloss);
  std::map<std::string, std::pair<std::size_t, std::int64_t>> sizes;
  for (const auto &r : records) {
    auto &s = sizes[r.checkpoint_id];
    ++s.first;
    s.second += r.token_count;
  }
  CsvTable t;
  t.header = {"checkpoint_id", "gen_loss", "examples", "tokens"};
  for (const auto &[id, loss] : genloss_by_checkpoint(records, mode)) {
    t.rows.push_back({id, format_real(loss), std::to_string(sizes[id].first), std::to_string(sizes[id].second)});
  }
  emit_csv(ctx, a.out, t, meta);
}

struct RankArgs {
  CandidateInputs inputs;
  std::int64_t k = 0;
  double margin = 0.0;
  std::string out;
};

void cmd_rank(Context &ctx, const RankArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  meta.k_used = a.k;
  const auto set = load_candidates(a.inputs, meta);
  const RankingReport report = rank_candidates(set.candidates, a.k, a.margin, !a.inputs.genloss.empty());
  json ruled = json::array();
  for (const auto &r : report.ruled_out) {
    ruled.push_back({{"checkpoint_id", r.checkpoint_id}, {"dominated_by", r.dominated_by}});
  }
  json ranked = json::array();
  for (const auto &r : report.ranked) {
    ranked.push_back({{"checkpoint_id", r.checkpoint_id}, {"pass_at_k", r.value}});
  }
  emit_json(ctx, a.out,
            {{"metadata", meta.to_json()},
             {"k_used", report.k_used},
             {"margin", a.margin},
             {"ruled_out", ruled},
             {"ranked", ranked},
             {"warning", report.warning ? json(*report.warning) : json(nullptr)}});
}

struct PredictArgs {
  CandidateInputs inputs;
  std::string metric;
  std::string combine = "mean";
  std::string out;
};

void cmd_predict(Context &ctx, const PredictArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  const auto set = load_candidates(a.inputs, meta);
  const MetricSpec metric = MetricSpec::parse(a.metric);
  const Combine combine = parse_combine(a.combine);
  if (metric.kind == MetricSpec::Kind::PassK || metric.kind == MetricSpec::Kind::AvgPassKGenLoss) {
    meta.k_used = metric.k;
  }
  const auto predictions = calibrate_and_predict(set.candidates, metric, combine);
  json rows = json::array();
  for (const auto &c : set.candidates) {
    rows.push_back({{"checkpoint_id", c.checkpoint_id},
                    {"predicted_post_rl_pass1", predictions.at(c.checkpoint_id)},
                    {"post_rl_pass1", c.post_rl_pass1 ? json(*c.post_rl_pass1) : json(nullptr)}});
  }
  emit_json(ctx, a.out,
            {{"metadata", meta.to_json()}, {"metric", metric.name()}, {"combine", a.combine}, {"predictions", rows}});
}

struct EvaluateArgs {
  CandidateInputs inputs;
  std::size_t n_fit = 0;
  std::size_t repeats = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> metrics;
  unsigned threads = 1;
  bool stratify = false;
  std::string combine = "mean";
  std::string bundle;
  std::string out;
};

void cmd_evaluate(Context &ctx, const EvaluateArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  meta.seed = a.seed;
  const auto set = load_candidates(a.inputs, meta);
  const Combine combine = parse_combine(a.combine);

  std::vector<MetricSpec> specs;
  if (a.metrics.empty()) {
    specs.push_back(MetricSpec::parse("pass1"));
    for (const auto k : set.ks) {
      if (k > 1) {
        specs.push_back({MetricSpec::Kind::PassK, k});
      }
    }
    if (!a.inputs.genloss.empty()) {
      specs.push_back(MetricSpec::parse("genloss"));
      if (set.ks.back() > 1) {
        specs.push_back({MetricSpec::Kind::AvgPassKGenLoss, set.ks.back()});
      }
    }
  } else {
    for (const auto &m : a.metrics) {
      specs.push_back(MetricSpec::parse(m));
    }
  }
  if (set.ks.back() > 1) {
    meta.k_used = set.ks.back();
  }

  SplitOptions options;
  options.threads = a.threads;
  if (a.stratify) {
    std::vector<std::string> strata;
    for (const auto &p : labeled_points(set.candidates, MetricSpec::parse("pass1"))) {
      const auto it = set.groups.find(p.checkpoint_id);
      if (it == set.groups.end()) {
        throw ValidationError("--stratify: label for " + p.checkpoint_id + " has no group");
      }
      strata.push_back(it->second);
    }
    options.strata = std::move(strata);
  }
  meta.extra["split"] = {{"n_fit", a.n_fit}, {"repeats", a.repeats}, {"stratified", a.stratify},
                         {"combine", a.combine}, {"points_sorted_by", "checkpoint_id"}};

  ReportBundle bundle;
  CsvTable summary;
  summary.header = {"metric", "mean_r2", "sd", "std_error", "evaluated", "skipped", "spearman"};
  CsvTable per_repeat;
  per_repeat.header = {"metric", "repeat", "r2"};

  json results = json::array();
  for (const auto &spec : specs) {
    const EvalProtocolResult r = evaluate_metric(set.candidates, spec, a.n_fit, a.repeats, a.seed, options, combine);
    const auto predictions = calibrate_and_predict(set.candidates, spec, combine);
    std::vector<double> pred, label;
    for (const auto &c : set.candidates) {
      if (c.post_rl_pass1) {
        pred.push_back(predictions.at(c.checkpoint_id));
        label.push_back(*c.post_rl_pass1);
      }
    }
    const double rho = spearman(pred, label);
    json entry{{"metric", spec.name()}, {"r2", protocol_json(r)}, {"spearman", rho}};
    if (spec.kind != MetricSpec::Kind::AvgPassKGenLoss) {
      const auto points = labeled_points(set.candidates, spec);
      std::vector<double> xs, ys;
      for (const auto &p : points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
      }
      entry["spearman_metric_vs_label"] = spearman(xs, ys);
      if (!a.bundle.empty()) {
        const LinearFit fit = fit_linear(points);
        const double in_sample = r_squared(fit, points);
        std::string name = spec.name();
        std::replace(name.begin(), name.end(), ':', '_');
        bundle.figures.emplace_back("scatter_" + name,
                                    plot_scatter(points, fit, {axis_label(spec), "post-RL Pass@1", spec.name()},
                                                 in_sample));
      }
    }
    results.push_back(entry);

    summary.rows.push_back({spec.name(), format_real(r.mean_r2), format_real(r.dispersion), format_real(r.std_error),
                            std::to_string(r.per_repeat_r2.size()), std::to_string(r.skipped.size()),
                            format_real(rho)});
    std::size_t valid = 0;
    for (std::size_t rep = 0; rep < r.repeats; ++rep) {
      if (std::find(r.skipped.begin(), r.skipped.end(), rep) != r.skipped.end()) {
        continue;
      }
      per_repeat.rows.push_back({spec.name(), std::to_string(rep), format_real(r.per_repeat_r2[valid++])});
    }
  }

  const json doc{{"metadata", meta.to_json()}, {"results", results}};
  emit_json(ctx, a.out, doc);
  if (!a.bundle.empty()) {
    bundle.metadata = meta;
    bundle.tables = {{"summary", summary}, {"per_repeat", per_repeat}};
    bundle.write(a.bundle);
  }
}

struct CurateArgs {
  std::string sft;
  std::string strategy;
  std::size_t count = 0;
  std::string parts;
  std::uint64_t seed = 0;
  std::string length_fn = "whitespace_tokens";
  double validation_fraction = 0.0;
  std::string validation_out;
  std::string out;
  std::string manifest;
};

std::vector<std::pair<Strategy, std::size_t>> parse_parts(const std::string &text) {
  std::vector<std::pair<Strategy, std::size_t>> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ValidationError("--parts: expected strategy:count, got '" + item + "'");
    }
    std::size_t count = 0;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1 || v < 1) {
        throw std::invalid_argument(item);
      }
      count = static_cast<std::size_t>(v);
    } catch (const std::exception &) {
      throw ValidationError("--parts: bad count in '" + item + "'");
    }
    parts.emplace_back(parse_strategy(item.substr(0, colon)), count);
  }
  return parts;
}

void cmd_curate(Context &ctx, const CurateArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  meta.seed = a.seed;
  add_input_hash(meta, a.sft);
  const LengthFn length_fn = parse_length_fn(a.length_fn);
  meta.length_fn = to_string(length_fn);

  CurationSpec spec;
  spec.strategy = parse_strategy(a.strategy);
  spec.seed = a.seed;
  if (spec.strategy == Strategy::Mixture) {
    spec.mixture_parts = parse_parts(a.parts);
    spec.count = 0;
    for (const auto &p : spec.mixture_parts) {
      spec.count += p.second;
    }
    if (a.count != 0 && a.count != spec.count) {
      throw ValidationError("--count " + std::to_string(a.count) + " differs from the sum of --parts");
    }
  } else {
    if (!a.parts.empty()) {
      throw ValidationError("--parts is only valid with --strategy mixture");
    }
    spec.count = a.count;
  }

  auto dataset = load_sft(a.sft);
  measure_lengths(dataset, length_fn);
  auto subset = select(dataset, spec);

  std::vector<SftExample> validation;
  if (a.validation_fraction > 0.0) {
    if (a.validation_out.empty()) {
      throw ValidationError("--validation-fraction needs --validation-out");
    }
    auto split = split_validation(subset, a.validation_fraction, a.seed);
    subset = std::move(split.train);
    validation = std::move(split.validation);
  }

  auto ids = [](const std::vector<SftExample> &v) {
    json arr = json::array();
    for (const auto &e : v) {
      arr.push_back(e.example_id);
    }
    return arr;
  };
  json parts = json::array();
  for (const auto &[s, n] : spec.mixture_parts) {
    parts.push_back({{"strategy", to_string(s)}, {"count", n}});
  }
  json manifest{{"metadata", meta.to_json()},
                {"spec",
                 {{"strategy", to_string(spec.strategy)},
                  {"count", spec.count},
                  {"mixture_parts", parts},
                  {"seed", spec.seed}}},
                {"length_fn", to_string(length_fn)},
                {"near_duplicate_dedup", false},
                {"selected_ids", ids(subset)}};
  if (a.validation_fraction > 0.0) {
    manifest["validation_fraction"] = a.validation_fraction;
    manifest["validation_ids"] = ids(validation);
    std::string text;
    for (const auto &e : validation) {
      text += to_jsonl_line(e) + "\n";
    }
    write_text_file(a.validation_out, text);
  }

  std::string text;
  for (const auto &e : subset) {
    text += to_jsonl_line(e) + "\n";
  }
  emit(ctx, a.out, text);
  std::string manifest_path = a.manifest;
  if (manifest_path.empty()) {
    const fs::path base = a.out == "-" ? fs::path(".") : fs::path(a.out).parent_path();
    manifest_path = (base / "curation-manifest.json").string();
  }
  write_text_file(manifest_path, manifest.dump(2) + "\n");
}

struct PlotArgs {
  CandidateInputs inputs;
  std::string points;
  std::string metric;
  std::string x_label;
  std::string y_label = "post-RL Pass@1";
  std::string title;
  std::string out;
};

void cmd_plot(Context &ctx, const PlotArgs &a) {
  ReportMetadata meta = base_metadata(ctx);
  std::vector<LabeledPoint> points;
  std::string x_label = a.x_label;
  if (!a.points.empty()) {
    const CsvTable t = CsvTable::parse(read_text_file(a.points), a.points);
    if (t.header != std::vector<std::string>{"checkpoint_id", "x", "y"}) {
      throw ValidationError(a.points + ": header must be checkpoint_id,x,y");
    }
    for (const auto &row : t.rows) {
      try {
        points.push_back({row[0], std::stod(row[1]), std::stod(row[2])});
      } catch (const std::exception &) {
        throw ValidationError(a.points + ": bad number in row for " + row[0]);
      }
    }
  } else {
    if (a.inputs.metrics.empty() || a.inputs.labels.empty() || a.metric.empty()) {
      throw ValidationError("plot needs --points, or --metrics with --labels and --metric");
    }
    const auto set = load_candidates(a.inputs, meta);
    const MetricSpec spec = MetricSpec::parse(a.metric);
    points = labeled_points(set.candidates, spec);
    if (x_label.empty()) {
      x_label = axis_label(spec);
    }
  }
  if (points.empty()) {
    throw ValidationError("plot needs at least one point");
  }
  LinearFit fit{0.0, points.front().y};
  std::optional<double> r2;
  if (points.size() >= 2) {
    fit = fit_linear(points);
    const bool constant_y = std::all_of(points.begin(), points.end(),
                                        [&](const LabeledPoint &p) { return p.y == points.front().y; });
    if (!constant_y) {
      r2 = r_squared(fit, points);
    }
  }
  emit(ctx, a.out,
       plot_scatter(points, fit, {x_label.empty() ? "post-SFT metric" : x_label, a.y_label, a.title}, r2));
}

void add_candidate_options(CLI::App *cmd, CandidateInputs &in, bool labels_required) {
  cmd->add_option("--metrics", in.metrics, "Metrics CSV written by passk")->required();
  auto *labels = cmd->add_option("--labels", in.labels, "labels.jsonl with post-RL Pass@1");
  if (labels_required) {
    labels->required();
  }
  cmd->add_option("--genloss", in.genloss, "genloss.jsonl records");
  cmd->add_option("--genloss-mode", in.genloss_mode, "token_weighted or per_example");
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Predict post-RL outcomes of SFT checkpoints from pre-RL signals", "rlready"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CollectArgs collect;
  auto *c_collect = app.add_subcommand("collect", "Sample completions from an inference endpoint");
  c_collect->add_option("--config", collect.config, "Flat JSON job file")->required();

  VerifyArgs verify;
  auto *c_verify = app.add_subcommand("verify", "Score samples against gold answers");
  c_verify->add_option("--samples", verify.samples)->required();
  c_verify->add_option("--gold", verify.gold)->required();
  c_verify->add_option("--out", verify.out, "outcomes.jsonl, or - for stdout")->required();

  PasskArgs passk;
  auto *c_passk = app.add_subcommand("passk", "Aggregate outcomes into Pass@k metrics");
  c_passk->add_option("--outcomes", passk.outcomes)->required();
  c_passk->add_option("--ks", passk.ks, "Comma-separated k values")->capture_default_str();
  c_passk->add_option("--agg", passk.agg, "macro or micro")->capture_default_str();
  c_passk->add_option("--out", passk.out, "metrics CSV, or - for stdout")->required();

  GenlossArgs genloss;
  auto *c_genloss = app.add_subcommand("genloss", "Aggregate generalization loss per checkpoint");
  c_genloss->add_option("--genloss", genloss.genloss)->required();
  c_genloss->add_option("--mode", genloss.mode, "token_weighted or per_example")->capture_default_str();
  c_genloss->add_option("--out", genloss.out)->required();

  RankArgs rank;
  auto *c_rank = app.add_subcommand("rank", "Rule out dominated checkpoints and rank by Pass@k");
  add_candidate_options(c_rank, rank.inputs, false);
  c_rank->add_option("--k", rank.k, "k of the Pass@k ranking")->required()->check(CLI::PositiveNumber);
  c_rank->add_option("--margin", rank.margin, "Dominance margin")->capture_default_str();
  c_rank->add_option("--out", rank.out)->required();

  PredictArgs predict;
  auto *c_predict = app.add_subcommand("predict", "Calibrate a linear predictor and predict post-RL Pass@1");
  add_candidate_options(c_predict, predict.inputs, true);
  c_predict->add_option("--metric", predict.metric, "pass1 | passk:K | genloss | avg:passk:K+genloss")->required();
  c_predict->add_option("--combine", predict.combine, "mean or bivariate")->capture_default_str();
  c_predict->add_option("--out", predict.out)->required();

  EvaluateArgs evaluate;
  auto *c_evaluate = app.add_subcommand("evaluate", "Repeated-split R^2 and Spearman per metric");
  add_candidate_options(c_evaluate, evaluate.inputs, true);
  c_evaluate->add_option("--n-fit", evaluate.n_fit)->required();
  c_evaluate->add_option("--repeats", evaluate.repeats)->capture_default_str();
  c_evaluate->add_option("--seed", evaluate.seed)->required();
  c_evaluate->add_option("--metric", evaluate.metrics, "Metric to evaluate (repeatable); default all");
  c_evaluate->add_option("--threads", evaluate.threads)->capture_default_str();
  c_evaluate->add_flag("--stratify", evaluate.stratify, "Stratify draws by the labels' group field");
  c_evaluate->add_option("--combine", evaluate.combine, "mean or bivariate")->capture_default_str();
  c_evaluate->add_option("--bundle", evaluate.bundle, "Directory for CSV tables and SVG figures");
  c_evaluate->add_option("--out", evaluate.out)->required();

  CurateArgs curate;
  auto *c_curate = app.add_subcommand("curate", "Select an SFT subset by response length");
  c_curate->add_option("--sft", curate.sft)->required();
  c_curate->add_option("--strategy", curate.strategy, "shortest | longest | random | mixture")->required();
  c_curate->add_option("--count", curate.count);
  c_curate->add_option("--parts", curate.parts, "Mixture parts, e.g. shortest:1000,longest:1000");
  c_curate->add_option("--seed", curate.seed)->required();
  c_curate->add_option("--length-fn", curate.length_fn, "chars or whitespace_tokens")->capture_default_str();
  c_curate->add_option("--validation-fraction", curate.validation_fraction);
  c_curate->add_option("--validation-out", curate.validation_out);
  c_curate->add_option("--out", curate.out)->required();
  c_curate->add_option("--manifest", curate.manifest, "Defaults to curation-manifest.json next to --out");

  PlotArgs plot;
  auto *c_plot = app.add_subcommand("plot", "Scatter plot of metric vs post-RL label with fitted line");
  c_plot->add_option("--points", plot.points, "CSV with checkpoint_id,x,y");
  c_plot->add_option("--metrics", plot.inputs.metrics);
  c_plot->add_option("--labels", plot.inputs.labels);
  c_plot->add_option("--genloss", plot.inputs.genloss);
  c_plot->add_option("--genloss-mode", plot.inputs.genloss_mode);
  c_plot->add_option("--metric", plot.metric);
  c_plot->add_option("--x-label", plot.x_label);
  c_plot->add_option("--y-label", plot.y_label);
  c_plot->add_option("--title", plot.title);
  c_plot->add_option("--out", plot.out)->required();

  std::vector<std::string> argv_storage{"rlready"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &s : argv_storage) {
    argv.push_back(s.data());
  }

  std::string command_line;
  for (const auto &s : args) {
    command_line += (command_line.empty() ? "" : " ") + s;
  }
  Context ctx{command_line, out};

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion &) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "rlready: error[usage]: " << one_line(e.what()) << "\n";
    return kExitValidation;
  }

  try {
    if (*c_collect) {
      cmd_collect(ctx, collect);
    } else if (*c_verify) {
      cmd_verify(ctx, verify);
    } else if (*c_passk) {
      cmd_passk(ctx, passk);
    } else if (*c_genloss) {
      cmd_genloss(ctx, genloss);
    } else if (*c_rank) {
      cmd_rank(ctx, rank);
    } else if (*c_predict) {
      cmd_predict(ctx, predict);
    } else if (*c_evaluate) {
      cmd_evaluate(ctx, evaluate);
    } else if (*c_curate) {
      cmd_curate(ctx, curate);
    } else if (*c_plot) {
      cmd_plot(ctx, plot);
    }
  } catch (const ValidationError &e) {
    err << "rlready: error[validation]: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const IoError &e) {
    err << "rlready: error[io]: " << one_line(e.what()) << "\n";
    return kExitIo;
  } catch (const std::exception &e) {
    err << "rlready: error[internal]: " << one_line(e.what()) << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

} // namespace rlready::cli
