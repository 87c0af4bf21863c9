// SPDX-License-Identifier: Apache-2.0
#include "rlready/records.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rlready/error.hpp"

namespace rlready {

using nlohmann::json;

namespace {

// Field access with schema errors that name the line and field.
class LineReader {
public:
  LineReader(const json &obj, const std::string &source, std::size_t line, std::set<std::string> allowed)
      : obj_(obj), source_(source), line_(line) {
    for (const auto &[key, value] : obj.items()) {
      if (!allowed.contains(key)) {
        fail(key, "unknown field");
      }
    }
  }

  [[noreturn]] void fail(const std::string &field, const std::string &what) const {
    throw ValidationError(source_ + ":" + std::to_string(line_) + ": field '" + field + "': " + what);
  }

  [[noreturn]] void fail(const std::string &what) const {
    throw ValidationError(source_ + ":" + std::to_string(line_) + ": " + what);
  }

  const json &require(const std::string &field) const {
    const auto it = obj_.find(field);
    if (it == obj_.end()) {
      fail(field, "missing");
    }
    return *it;
  }

  std::string string(const std::string &field, bool allow_empty = true) const {
    const json &v = require(field);
    if (!v.is_string()) {
      fail(field, "expected a string");
    }
    auto s = v.get<std::string>();
    if (!allow_empty && s.empty()) {
      fail(field, "must not be empty");
    }
    return s;
  }

  std::string optional_string(const std::string &field) const {
    const auto it = obj_.find(field);
    if (it == obj_.end() || it->is_null()) {
      return {};
    }
    if (!it->is_string()) {
      fail(field, "expected a string");
    }
    return it->get<std::string>();
  }

  std::int64_t integer(const std::string &field) const {
    const json &v = require(field);
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(INT64_MAX)) {
        fail(field, "integer out of range");
      }
      return static_cast<std::int64_t>(u);
    }
    if (!v.is_number_integer()) {
      fail(field, "expected an integer");
    }
    return v.get<std::int64_t>();
  }

  double real(const std::string &field) const {
    const json &v = require(field);
    if (!v.is_number()) {
      fail(field, "expected a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(field, "not finite");
    }
    return d;
  }

  std::size_t line() const { return line_; }

private:
  const json &obj_;
  const std::string &source_;
  std::size_t line_;
};

template <typename Record, typename Parse, typename Key>
std::vector<Record> parse_lines(std::istream &in, const std::string &source, Parse parse, Key key,
                                const char *key_desc) {
  std::vector<Record> out;
  std::map<std::string, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') {
      text.pop_back();
    }
    if (text.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error &e) {
      throw ValidationError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw ValidationError(source + ":" + std::to_string(line) + ": expected a JSON object");
    }
    Record rec = parse(obj, line);
    const std::string k = key(rec);
    const auto [it, inserted] = seen.emplace(k, line);
    if (!inserted) {
      throw ValidationError(source + ":" + std::to_string(line) + ": duplicate " + key_desc + " " + k +
                            " (first at line " + std::to_string(it->second) + ", again at line " +
                            std::to_string(line) + ")");
    }
    out.push_back(std::move(rec));
  }
  if (in.bad()) {
    throw IoError("read error in " + source);
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return in;
}

std::string join_key(std::initializer_list<std::string_view> parts) {
  std::string k = "(";
  bool first = true;
  for (const auto p : parts) {
    k += first ? "" : ", ";
    k += p;
    first = false;
  }
  return k + ")";
}

} // namespace

const char *to_string(RecordKind kind) {
  switch (kind) {
  case RecordKind::Samples:
    return "samples";
  case RecordKind::Outcomes:
    return "outcomes";
  case RecordKind::GenLoss:
    return "genloss";
  case RecordKind::Labels:
    return "labels";
  case RecordKind::Gold:
    return "gold";
  case RecordKind::Sft:
    return "sft";
  }
  return "";
}

RecordKind parse_record_kind(const std::string &name) {
  for (const auto k : {RecordKind::Samples, RecordKind::Outcomes, RecordKind::GenLoss, RecordKind::Labels,
                       RecordKind::Gold, RecordKind::Sft}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  throw ValidationError("unknown record kind '" + name + "'");
}

json to_json(const Sample &r) {
  json j{{"checkpoint_id", r.checkpoint_id},
         {"benchmark", r.benchmark_id},
         {"task_id", r.task_id},
         {"sample_index", r.sample_index},
         {"text", r.text}};
  if (!r.finish_reason.empty()) {
    j["finish_reason"] = r.finish_reason;
  }
  return j;
}

json to_json(const TaskOutcome &r) {
  return {{"checkpoint_id", r.checkpoint_id}, {"benchmark", r.benchmark_id}, {"task_id", r.task_id},
          {"n", r.n},
          {"c", r.c}};
}

json to_json(const GenLossRecord &r) {
  return {{"checkpoint_id", r.checkpoint_id},
          {"example_id", r.example_id},
          {"nll_sum", r.nll_sum},
          {"token_count", r.token_count}};
}

json to_json(const Label &r) {
  json j{{"checkpoint_id", r.checkpoint_id}, {"post_rl_pass1", r.post_rl_pass1}};
  if (!r.group.empty()) {
    j["group"] = r.group;
  }
  return j;
}

json to_json(const GoldAnswer &r) {
  return {{"benchmark", r.benchmark_id}, {"task_id", r.task_id}, {"answer", r.answer}};
}

json to_json(const SftExample &r) {
  return {{"example_id", r.example_id}, {"prompt", r.prompt}, {"response", r.response}};
}

std::vector<Sample> parse_samples(std::istream &in, const std::string &source) {
  return parse_lines<Sample>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line,
                     {"checkpoint_id", "benchmark", "task_id", "sample_index", "text", "finish_reason"});
        Sample s;
        s.checkpoint_id = r.string("checkpoint_id", false);
        s.benchmark_id = r.string("benchmark", false);
        s.task_id = r.string("task_id", false);
        s.sample_index = r.integer("sample_index");
        if (s.sample_index < 0) {
          r.fail("sample_index", "must be >= 0");
        }
        s.text = r.string("text");
        s.finish_reason = r.optional_string("finish_reason");
        return s;
      },
      [](const Sample &s) {
        return join_key({s.checkpoint_id, s.benchmark_id, s.task_id, std::to_string(s.sample_index)});
      },
      "sample");
}

std::vector<TaskOutcome> parse_outcomes(std::istream &in, const std::string &source) {
  return parse_lines<TaskOutcome>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line, {"checkpoint_id", "benchmark", "task_id", "n", "c"});
        TaskOutcome o;
        o.checkpoint_id = r.string("checkpoint_id", false);
        o.benchmark_id = r.string("benchmark", false);
        o.task_id = r.string("task_id", false);
        o.n = r.integer("n");
        o.c = r.integer("c");
        if (o.n < 1) {
          r.fail("n", "must be >= 1");
        }
        if (o.c < 0) {
          r.fail("c", "must be >= 0");
        }
        if (o.c > o.n) {
          r.fail("c", "c exceeds n at line " + std::to_string(line));
        }
        return o;
      },
      [](const TaskOutcome &o) { return join_key({o.checkpoint_id, o.benchmark_id, o.task_id}); }, "task");
}

std::vector<GenLossRecord> parse_genloss(std::istream &in, const std::string &source) {
  return parse_lines<GenLossRecord>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line, {"checkpoint_id", "example_id", "nll_sum", "token_count"});
        GenLossRecord g;
        g.checkpoint_id = r.string("checkpoint_id", false);
        g.example_id = r.string("example_id", false);
        g.nll_sum = r.real("nll_sum");
        g.token_count = r.integer("token_count");
        if (g.nll_sum < 0.0) {
          r.fail("nll_sum", "must be >= 0");
        }
        if (g.token_count < 1) {
          r.fail("token_count", "must be >= 1");
        }
        return g;
      },
      [](const GenLossRecord &g) { return join_key({g.checkpoint_id, g.example_id}); }, "example");
}

std::vector<Label> parse_labels(std::istream &in, const std::string &source) {
  return parse_lines<Label>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line, {"checkpoint_id", "post_rl_pass1", "group"});
        Label l;
        l.checkpoint_id = r.string("checkpoint_id", false);
        l.post_rl_pass1 = r.real("post_rl_pass1");
        if (l.post_rl_pass1 < 0.0 || l.post_rl_pass1 > 1.0) {
          r.fail("post_rl_pass1", "must lie in [0, 1]");
        }
        l.group = r.optional_string("group");
        return l;
      },
      [](const Label &l) { return join_key({l.checkpoint_id}); }, "checkpoint");
}

std::vector<GoldAnswer> parse_gold(std::istream &in, const std::string &source) {
  return parse_lines<GoldAnswer>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line, {"benchmark", "task_id", "answer"});
        GoldAnswer g;
        g.benchmark_id = r.string("benchmark", false);
        g.task_id = r.string("task_id", false);
        g.answer = r.string("answer", false);
        return g;
      },
      [](const GoldAnswer &g) { return join_key({g.benchmark_id, g.task_id}); }, "task");
}

std::vector<SftExample> parse_sft(std::istream &in, const std::string &source) {
  return parse_lines<SftExample>(
      in, source,
      [&](const json &obj, std::size_t line) {
        LineReader r(obj, source, line, {"example_id", "prompt", "response"});
        SftExample e;
        e.example_id = r.string("example_id", false);
        e.prompt = r.string("prompt");
        e.response = r.string("response");
        return e;
      },
      [](const SftExample &e) { return join_key({e.example_id}); }, "example");
}

#define RLREADY_LOADER(name, type)                                                                                  \
  std::vector<type> load_##name(const std::filesystem::path &path) {                                              \
    auto in = open_input(path);                                                                                    \
    return parse_##name(in, path.string());                                                                        \
  }

RLREADY_LOADER(samples, Sample)
RLREADY_LOADER(outcomes, TaskOutcome)
RLREADY_LOADER(genloss, GenLossRecord)
RLREADY_LOADER(labels, Label)
RLREADY_LOADER(gold, GoldAnswer)
RLREADY_LOADER(sft, SftExample)

#undef RLREADY_LOADER

RecordList load(RecordKind kind, const std::filesystem::path &path) {
  switch (kind) {
  case RecordKind::Samples:
    return load_samples(path);
  case RecordKind::Outcomes:
    return load_outcomes(path);
  case RecordKind::GenLoss:
    return load_genloss(path);
  case RecordKind::Labels:
    return load_labels(path);
  case RecordKind::Gold:
    return load_gold(path);
  case RecordKind::Sft:
    return load_sft(path);
  }
  throw ValidationError("unknown record kind");
}

template <typename Record>
void write_jsonl(const std::filesystem::path &path, const std::vector<Record> &records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  for (const auto &r : records) {
    out << to_jsonl_line(r) << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

template void write_jsonl(const std::filesystem::path &, const std::vector<Sample> &);
template void write_jsonl(const std::filesystem::path &, const std::vector<TaskOutcome> &);
template void write_jsonl(const std::filesystem::path &, const std::vector<GenLossRecord> &);
template void write_jsonl(const std::filesystem::path &, const std::vector<Label> &);
template void write_jsonl(const std::filesystem::path &, const std::vector<GoldAnswer> &);
template void write_jsonl(const std::filesystem::path &, const std::vector<SftExample> &);

const char *to_string(GenLossMode mode) {
  return mode == GenLossMode::TokenWeighted ? "token_weighted" : "per_example";
}

GenLossMode parse_genloss_mode(const std::string &name) {
  if (name == "token_weighted") {
    return GenLossMode::TokenWeighted;
  }
  if (name == "per_example") {
    return GenLossMode::PerExample;
  }
  throw ValidationError("unknown genloss mode '" + name + "' (expected token_weighted or per_example)");
}

double aggregate_genloss(std::span<const GenLossRecord> records, GenLossMode mode) {
  if (records.empty()) {
    throw ValidationError("no generalization-loss records to aggregate");
  }
  double nll = 0.0;
  double tokens = 0.0;
  double per_example = 0.0;
  for (const auto &r : records) {
    if (r.checkpoint_id != records.front().checkpoint_id) {
      throw ValidationError("mixed checkpoint ids in genloss aggregation: '" + records.front().checkpoint_id +
                            "' and '" + r.checkpoint_id + "'");
    }
    if (r.token_count < 1 || r.nll_sum < 0.0) {
      throw ValidationError("invalid genloss record for example " + r.example_id);
    }
    nll += r.nll_sum;
    tokens += static_cast<double>(r.token_count);
    per_example += r.nll_sum / static_cast<double>(r.token_count);
  }
  return mode == GenLossMode::TokenWeighted ? nll / tokens : per_example / static_cast<double>(records.size());
}

} // namespace rlready
