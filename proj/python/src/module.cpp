// SPDX-License-Identifier: Apache-2.0
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "rlready/curate.hpp"
#include "rlready/error.hpp"
#include "rlready/passk.hpp"
#include "rlready/predict.hpp"
#include "rlready/records.hpp"
#include "rlready/report.hpp"
#include "rlready/stats.hpp"
#include "rlready/verifier.hpp"

namespace py = pybind11;
using namespace rlready;

namespace {

std::vector<LabeledPoint> to_points(const std::vector<double> &xs, const std::vector<double> &ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError("x and y differ in length");
  }
  std::vector<LabeledPoint> points;
  points.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    points.push_back({std::to_string(i), xs[i], ys[i]});
  }
  return points;
}

Candidate make_candidate(const CheckpointMetrics &metrics, std::optional<double> post_rl_pass1) {
  Candidate c;
  c.checkpoint_id = metrics.checkpoint_id;
  c.metrics = metrics;
  c.post_rl_pass1 = post_rl_pass1;
  return c;
}

} // namespace

PYBIND11_MODULE(_rlready, m) {
  m.doc() = "Native core of rlready";
  m.attr("__version__") = kToolVersion;
  m.attr("VERIFIER_RULES") = kVerifierRulesVersion;

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", validation.ptr());
  auto io = py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<PartialCompletionError>(m, "PartialCompletionError", io.ptr());

  py::enum_<Aggregation>(m, "Aggregation").value("MACRO", Aggregation::Macro).value("MICRO", Aggregation::Micro);
  py::enum_<Combine>(m, "Combine").value("MEAN", Combine::Mean).value("BIVARIATE", Combine::Bivariate);
  py::enum_<GenLossMode>(m, "GenLossMode")
      .value("TOKEN_WEIGHTED", GenLossMode::TokenWeighted)
      .value("PER_EXAMPLE", GenLossMode::PerExample);
  py::enum_<LengthFn>(m, "LengthFn").value("CHARS", LengthFn::Chars).value("WHITESPACE_TOKENS", LengthFn::WhitespaceTokens);
  py::enum_<Strategy>(m, "Strategy")
      .value("SHORTEST", Strategy::Shortest)
      .value("LONGEST", Strategy::Longest)
      .value("RANDOM", Strategy::Random)
      .value("MIXTURE", Strategy::Mixture);

  py::class_<TaskOutcome>(m, "TaskOutcome")
      .def(py::init([](std::string checkpoint_id, std::string benchmark_id, std::string task_id, std::int64_t n,
                       std::int64_t c) { return TaskOutcome{checkpoint_id, benchmark_id, task_id, n, c}; }),
           py::arg("checkpoint_id"), py::arg("benchmark_id"), py::arg("task_id"), py::arg("n"), py::arg("c"))
      .def_readwrite("checkpoint_id", &TaskOutcome::checkpoint_id)
      .def_readwrite("benchmark_id", &TaskOutcome::benchmark_id)
      .def_readwrite("task_id", &TaskOutcome::task_id)
      .def_readwrite("n", &TaskOutcome::n)
      .def_readwrite("c", &TaskOutcome::c)
      .def("__eq__", [](const TaskOutcome &a, const TaskOutcome &b) { return a == b; });

  py::class_<PassKCurve>(m, "PassKCurve")
      .def_readonly("ks", &PassKCurve::ks)
      .def_readonly("values", &PassKCurve::values)
      .def("at", &PassKCurve::at, py::arg("k"));

  py::class_<CheckpointMetrics>(m, "CheckpointMetrics")
      .def(py::init([](std::string checkpoint_id, double pass1, std::map<std::int64_t, double> passk,
                       std::optional<double> gen_loss) {
             CheckpointMetrics cm;
             cm.checkpoint_id = std::move(checkpoint_id);
             cm.pass1 = pass1;
             for (const auto &[k, v] : passk) {
               cm.passk.ks.push_back(k);
               cm.passk.values.push_back(v);
             }
             cm.gen_loss = gen_loss;
             return cm;
           }),
           py::arg("checkpoint_id"), py::arg("pass1"), py::arg("passk") = std::map<std::int64_t, double>{},
           py::arg("gen_loss") = std::nullopt)
      .def_readonly("checkpoint_id", &CheckpointMetrics::checkpoint_id)
      .def_readonly("pass1", &CheckpointMetrics::pass1)
      .def_readonly("passk", &CheckpointMetrics::passk)
      .def_readwrite("gen_loss", &CheckpointMetrics::gen_loss)
      .def_readonly("per_benchmark", &CheckpointMetrics::per_benchmark)
      .def_readonly("task_count", &CheckpointMetrics::task_count);

  py::class_<Candidate>(m, "Candidate")
      .def(py::init(&make_candidate), py::arg("metrics"), py::arg("post_rl_pass1") = std::nullopt)
      .def_readonly("checkpoint_id", &Candidate::checkpoint_id)
      .def_readonly("metrics", &Candidate::metrics)
      .def_readwrite("post_rl_pass1", &Candidate::post_rl_pass1);

  py::class_<RuledOut>(m, "RuledOut")
      .def_readonly("checkpoint_id", &RuledOut::checkpoint_id)
      .def_readonly("dominated_by", &RuledOut::dominated_by);
  py::class_<RankedEntry>(m, "RankedEntry")
      .def_readonly("checkpoint_id", &RankedEntry::checkpoint_id)
      .def_readonly("value", &RankedEntry::value);
  py::class_<RankingReport>(m, "RankingReport")
      .def_readonly("ruled_out", &RankingReport::ruled_out)
      .def_readonly("ranked", &RankingReport::ranked)
      .def_readonly("k_used", &RankingReport::k_used)
      .def_readonly("warning", &RankingReport::warning);

  py::class_<LinearFit>(m, "LinearFit")
      .def_readonly("slope", &LinearFit::slope)
      .def_readonly("intercept", &LinearFit::intercept)
      .def("__call__", &LinearFit::operator());

  py::class_<EvalProtocolResult>(m, "EvalProtocolResult")
      .def_readonly("per_repeat_r2", &EvalProtocolResult::per_repeat_r2)
      .def_readonly("mean_r2", &EvalProtocolResult::mean_r2)
      .def_readonly("dispersion", &EvalProtocolResult::dispersion)
      .def_readonly("std_error", &EvalProtocolResult::std_error)
      .def_readonly("n_fit", &EvalProtocolResult::n_fit)
      .def_readonly("n_val", &EvalProtocolResult::n_val)
      .def_readonly("repeats", &EvalProtocolResult::repeats)
      .def_readonly("skipped", &EvalProtocolResult::skipped)
      .def_readonly("seed", &EvalProtocolResult::seed);

  py::class_<GenLossRecord>(m, "GenLossRecord")
      .def(py::init([](std::string checkpoint_id, std::string example_id, double nll_sum, std::int64_t token_count) {
             return GenLossRecord{checkpoint_id, example_id, nll_sum, token_count};
           }),
           py::arg("checkpoint_id"), py::arg("example_id"), py::arg("nll_sum"), py::arg("token_count"));

  py::class_<SftExample>(m, "SftExample")
      .def(py::init([](std::string example_id, std::string prompt, std::string response, std::int64_t length) {
             return SftExample{example_id, prompt, response, length};
           }),
           py::arg("example_id"), py::arg("prompt") = "", py::arg("response") = "", py::arg("length") = 0)
      .def_readwrite("example_id", &SftExample::example_id)
      .def_readwrite("prompt", &SftExample::prompt)
      .def_readwrite("response", &SftExample::response)
      .def_readwrite("length", &SftExample::length);

  m.def("pass_at_k", &pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def(
      "aggregate_all",
      [](const std::vector<TaskOutcome> &outcomes, const std::vector<std::int64_t> &ks, Aggregation mode) {
        return aggregate_all(outcomes, ks, mode);
      },
      py::arg("outcomes"), py::arg("ks"), py::arg("mode") = Aggregation::Macro);

  m.def("extract_boxed", &extract_boxed, py::arg("text"));
  m.def("normalize", &normalize, py::arg("answer"));
  m.def("answers_equal", &answers_equal, py::arg("a"), py::arg("b"));

  m.def(
      "fit_linear",
      [](const std::vector<double> &xs, const std::vector<double> &ys) { return fit_linear(to_points(xs, ys)); },
      py::arg("x"), py::arg("y"));
  m.def(
      "r_squared",
      [](const std::vector<double> &predicted, const std::vector<double> &actual) {
        return r_squared(std::span<const double>(predicted), std::span<const double>(actual));
      },
      py::arg("predicted"), py::arg("actual"));
  m.def(
      "spearman", [](const std::vector<double> &xs, const std::vector<double> &ys) { return spearman(xs, ys); },
      py::arg("x"), py::arg("y"));
  m.def(
      "repeated_split_eval",
      [](const std::vector<double> &xs, const std::vector<double> &ys, std::size_t n_fit, std::size_t repeats,
         std::uint64_t seed, unsigned threads) {
        SplitOptions opts;
        opts.threads = threads;
        py::gil_scoped_release release;
        return repeated_split_eval(to_points(xs, ys), n_fit, repeats, seed, opts);
      },
      py::arg("x"), py::arg("y"), py::arg("n_fit"), py::arg("repeats"), py::arg("seed"), py::arg("threads") = 1);

  m.def(
      "pareto_rule_out",
      [](const std::vector<Candidate> &candidates, double margin) { return pareto_rule_out(candidates, margin); },
      py::arg("candidates"), py::arg("margin") = 0.0);
  m.def(
      "rank_candidates",
      [](const std::vector<Candidate> &candidates, std::int64_t k, double margin, bool require_gen_loss) {
        return rank_candidates(candidates, k, margin, require_gen_loss);
      },
      py::arg("candidates"), py::arg("k"), py::arg("margin") = 0.0, py::arg("require_gen_loss") = false);
  m.def(
      "calibrate_and_predict",
      [](const std::vector<Candidate> &candidates, const std::string &metric, Combine combine) {
        return calibrate_and_predict(candidates, MetricSpec::parse(metric), combine);
      },
      py::arg("candidates"), py::arg("metric"), py::arg("combine") = Combine::Mean);
  m.def(
      "evaluate_metric",
      [](const std::vector<Candidate> &candidates, const std::string &metric, std::size_t n_fit, std::size_t repeats,
         std::uint64_t seed, Combine combine) {
        return evaluate_metric(candidates, MetricSpec::parse(metric), n_fit, repeats, seed, {}, combine);
      },
      py::arg("candidates"), py::arg("metric"), py::arg("n_fit"), py::arg("repeats"), py::arg("seed"),
      py::arg("combine") = Combine::Mean);

  m.def(
      "aggregate_genloss",
      [](const std::vector<GenLossRecord> &records, GenLossMode mode) { return aggregate_genloss(records, mode); },
      py::arg("records"), py::arg("mode") = GenLossMode::TokenWeighted);

  m.def("measure_length", &measure_length, py::arg("response"), py::arg("fn") = LengthFn::Chars);
  m.def(
      "select",
      [](std::vector<SftExample> dataset, Strategy strategy, std::size_t count,
         std::vector<std::pair<Strategy, std::size_t>> mixture_parts, std::uint64_t seed) {
        CurationSpec spec;
        spec.strategy = strategy;
        spec.count = count;
        spec.mixture_parts = std::move(mixture_parts);
        spec.seed = seed;
        return select(dataset, spec);
      },
      py::arg("dataset"), py::arg("strategy"), py::arg("count"),
      py::arg("mixture_parts") = std::vector<std::pair<Strategy, std::size_t>>{}, py::arg("seed") = 0);
  m.def(
      "split_validation",
      [](const std::vector<SftExample> &dataset, double fraction, std::uint64_t seed) {
        auto split = split_validation(dataset, fraction, seed);
        return py::make_tuple(split.train, split.validation);
      },
      py::arg("dataset"), py::arg("validation_fraction"), py::arg("seed"));

  m.def("load_outcomes", &load_outcomes, py::arg("path"));
  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
