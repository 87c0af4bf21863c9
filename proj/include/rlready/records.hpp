// SPDX-License-Identifier: Apache-2.0
//
// JSONL schemas for every record kind the tool reads or writes.
//
//   samples.jsonl   {checkpoint_id, benchmark, task_id, sample_index, text[, finish_reason]}
//   outcomes.jsonl  {checkpoint_id, benchmark, task_id, n, c}
//   genloss.jsonl   {checkpoint_id, example_id, nll_sum, token_count}
//   labels.jsonl    {checkpoint_id, post_rl_pass1[, group]}
//   gold.jsonl      {benchmark, task_id, answer}
//   sft.jsonl       {example_id, prompt, response}
//
// Loaders validate every line and reject the whole file on the first bad
// line. Unknown fields are rejected so that a load/serialize cycle is
// lossless.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlready/curate.hpp"
#include "rlready/passk.hpp"
#include "rlready/verifier.hpp"

namespace rlready {

struct GenLossRecord {
  std::string checkpoint_id;
  std::string example_id;
  double nll_sum = 0.0;
  std::int64_t token_count = 1;

  friend bool operator==(const GenLossRecord &, const GenLossRecord &) = default;
};

struct Label {
  std::string checkpoint_id;
  double post_rl_pass1 = 0.0;
  // Optional stratum used by the stratified split mode.
  std::string group;

  friend bool operator==(const Label &, const Label &) = default;
};

enum class RecordKind { Samples, Outcomes, GenLoss, Labels, Gold, Sft };

const char *to_string(RecordKind kind);
RecordKind parse_record_kind(const std::string &name);

nlohmann::json to_json(const Sample &r);
nlohmann::json to_json(const TaskOutcome &r);
nlohmann::json to_json(const GenLossRecord &r);
nlohmann::json to_json(const Label &r);
nlohmann::json to_json(const GoldAnswer &r);
nlohmann::json to_json(const SftExample &r);

// One compact JSON line (keys sorted), without the trailing newline.
template <typename Record> std::string to_jsonl_line(const Record &r) { return to_json(r).dump(); }

std::vector<Sample> parse_samples(std::istream &in, const std::string &source = "<stream>");
std::vector<TaskOutcome> parse_outcomes(std::istream &in, const std::string &source = "<stream>");
std::vector<GenLossRecord> parse_genloss(std::istream &in, const std::string &source = "<stream>");
std::vector<Label> parse_labels(std::istream &in, const std::string &source = "<stream>");
std::vector<GoldAnswer> parse_gold(std::istream &in, const std::string &source = "<stream>");
std::vector<SftExample> parse_sft(std::istream &in, const std::string &source = "<stream>");

std::vector<Sample> load_samples(const std::filesystem::path &path);
std::vector<TaskOutcome> load_outcomes(const std::filesystem::path &path);
std::vector<GenLossRecord> load_genloss(const std::filesystem::path &path);
std::vector<Label> load_labels(const std::filesystem::path &path);
std::vector<GoldAnswer> load_gold(const std::filesystem::path &path);
std::vector<SftExample> load_sft(const std::filesystem::path &path);

using RecordList = std::variant<std::vector<Sample>, std::vector<TaskOutcome>, std::vector<GenLossRecord>,
                                std::vector<Label>, std::vector<GoldAnswer>, std::vector<SftExample>>;

RecordList load(RecordKind kind, const std::filesystem::path &path);

// Writes records as JSONL, replacing the file.
template <typename Record>
void write_jsonl(const std::filesystem::path &path, const std::vector<Record> &records);

enum class GenLossMode {
  // sum(nll_sum) / sum(token_count)
  TokenWeighted,
  // mean of nll_sum / token_count
  PerExample,
};

const char *to_string(GenLossMode mode);
GenLossMode parse_genloss_mode(const std::string &name);

// Generalization loss of one checkpoint.
double aggregate_genloss(std::span<const GenLossRecord> records, GenLossMode mode = GenLossMode::TokenWeighted);

} // namespace rlready
