// SPDX-License-Identifier: Apache-2.0
//
// Report plumbing: provenance metadata, CSV tables, the metrics table
// format, and static SVG scatter plots.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlready/passk.hpp"
#include "rlready/stats.hpp"

namespace rlready {

inline constexpr const char *kToolVersion = "0.1.0";

struct ReportMetadata {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> k_used;
  std::optional<std::string> aggregation;
  std::optional<std::string> length_fn;
  std::string verifier_rules;
  std::string command;
  // Input file name -> SHA-256 of its contents.
  std::map<std::string, std::string> input_hashes;
  nlohmann::json extra = nlohmann::json::object();

  // Always carries tool_version and verifier_rules; unset optionals are null.
  nlohmann::json to_json() const;
};

// Records the SHA-256 of path under its string form.
void add_input_hash(ReportMetadata &meta, const std::filesystem::path &path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  static CsvTable parse(const std::string &text, const std::string &source = "<csv>");
};

struct ReportBundle {
  ReportMetadata metadata;
  std::vector<std::pair<std::string, CsvTable>> tables;
  std::vector<std::pair<std::string, std::string>> figures;

  // Writes metadata.json, <name>.csv and <name>.svg into dir.
  void write(const std::filesystem::path &dir) const;
};

// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

// Metrics table: one aggregate row per checkpoint (scope "*") followed by
// one row per benchmark.
//   checkpoint_id,scope,tasks,n_min,n_max,pass1,pass@K1,pass@K2,...
CsvTable metrics_table(std::span<const CheckpointMetrics> metrics);
std::vector<CheckpointMetrics> parse_metrics_table(const CsvTable &table);

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

struct PlotLabels {
  std::string x_label = "post-SFT metric";
  std::string y_label = "post-RL Pass@1";
  std::string title;
};

// Deterministic 800x600 SVG: points as circles, the fit drawn across the
// x-range, and an R^2 annotation when r2 is given. Throws ValidationError
// for an empty point list.
std::string plot_scatter(std::span<const LabeledPoint> points, const LinearFit &fit, const PlotLabels &labels = {},
                         std::optional<double> r2 = std::nullopt);

} // namespace rlready
