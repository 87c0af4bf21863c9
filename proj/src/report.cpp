// SPDX-License-Identifier: Apache-2.0
#include "rlready/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rlready/error.hpp"
#include "rlready/store.hpp"
#include "rlready/verifier.hpp"

namespace rlready {

namespace fs = std::filesystem;
using nlohmann::json;

json ReportMetadata::to_json() const {
  json j;
  j["tool_version"] = kToolVersion;
  j["verifier_rules"] = verifier_rules.empty() ? std::string(kVerifierRulesVersion) : verifier_rules;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["k_used"] = k_used ? json(*k_used) : json(nullptr);
  j["aggregation"] = aggregation ? json(*aggregation) : json(nullptr);
  j["length_fn"] = length_fn ? json(*length_fn) : json(nullptr);
  j["command"] = command;
  j["input_hashes"] = input_hashes;
  for (const auto &[k, v] : extra.items()) {
    j[k] = v;
  }
  return j;
}

void add_input_hash(ReportMetadata &meta, const fs::path &path) {
  if (!fs::exists(path)) {
    throw IoError("cannot open " + path.string());
  }
  meta.input_hashes[path.string()] = sha256_file(path);
}

std::string CsvTable::to_csv() const {
  auto field = [](const std::string &f) {
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      return f;
    }
    std::string q = "\"";
    for (const char ch : f) {
      q += ch;
      if (ch == '"') {
        q += '"';
      }
    }
    return q + "\"";
  };
  std::string out;
  auto row = [&](const std::vector<std::string> &r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out += (i ? "," : "") + field(r[i]);
    }
    out += '\n';
  };
  row(header);
  for (const auto &r : rows) {
    row(r);
  }
  return out;
}

CsvTable CsvTable::parse(const std::string &text, const std::string &source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> current;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      current.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        ++i;
      }
      if (any || !field.empty()) {
        current.push_back(std::move(field));
        records.push_back(std::move(current));
      }
      current.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) {
    throw ValidationError(source + ": unterminated quoted field");
  }
  if (any || !field.empty()) {
    current.push_back(std::move(field));
    records.push_back(std::move(current));
  }
  if (records.empty()) {
    throw ValidationError(source + ": missing header row");
  }
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw ValidationError(source + ":" + std::to_string(r + 1) + ": expected " + std::to_string(t.header.size()) +
                            " fields, got " + std::to_string(records[r].size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

void ReportBundle::write(const fs::path &dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  write_text_file(dir / "metadata.json", metadata.to_json().dump(2) + "\n");
  for (const auto &[name, table] : tables) {
    write_text_file(dir / (name + ".csv"), table.to_csv());
  }
  for (const auto &[name, svg] : figures) {
    write_text_file(dir / (name + ".svg"), svg);
  }
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_real(const std::string &s, const std::string &what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("metrics table: bad number '" + s + "' in " + what);
  }
  return v;
}

std::int64_t parse_int(const std::string &s, const std::string &what) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("metrics table: bad integer '" + s + "' in " + what);
  }
  return v;
}

} // namespace

CsvTable metrics_table(std::span<const CheckpointMetrics> metrics) {
  CsvTable t;
  t.header = {"checkpoint_id", "scope", "tasks", "n_min", "n_max", "pass1"};
  if (metrics.empty()) {
    return t;
  }
  const auto &ks = metrics.front().passk.ks;
  for (const auto k : ks) {
    t.header.push_back("pass@" + std::to_string(k));
  }
  for (const auto &m : metrics) {
    if (m.passk.ks != ks) {
      throw ValidationError("metrics table needs one k grid for every checkpoint");
    }
    std::vector<std::string> row{m.checkpoint_id, "*", std::to_string(m.task_count), std::to_string(m.n_min),
                                 std::to_string(m.n_max), format_real(m.pass1)};
    for (const double v : m.passk.values) {
      row.push_back(format_real(v));
    }
    t.rows.push_back(std::move(row));
    for (const auto &[bench, curve] : m.per_benchmark) {
      std::vector<std::string> brow{m.checkpoint_id, bench, "", "", "", ""};
      if (const auto p1 = curve.at(1)) {
        brow[5] = format_real(*p1);
      }
      for (const double v : curve.values) {
        brow.push_back(format_real(v));
      }
      t.rows.push_back(std::move(brow));
    }
  }
  return t;
}

std::vector<CheckpointMetrics> parse_metrics_table(const CsvTable &table) {
  static const std::vector<std::string> kFixed{"checkpoint_id", "scope", "tasks", "n_min", "n_max", "pass1"};
  if (table.header.size() < kFixed.size() || !std::equal(kFixed.begin(), kFixed.end(), table.header.begin())) {
    throw ValidationError("metrics table: header must start with checkpoint_id,scope,tasks,n_min,n_max,pass1");
  }
  std::vector<std::int64_t> ks;
  for (std::size_t i = kFixed.size(); i < table.header.size(); ++i) {
    const std::string &h = table.header[i];
    if (h.rfind("pass@", 0) != 0) {
      throw ValidationError("metrics table: unexpected column '" + h + "'");
    }
    ks.push_back(parse_int(h.substr(5), "header"));
  }
  std::map<std::string, CheckpointMetrics> by_id;
  std::set<std::string> aggregate_seen;
  for (const auto &row : table.rows) {
    const std::string &id = row[0];
    PassKCurve curve;
    curve.ks = ks;
    for (std::size_t i = kFixed.size(); i < row.size(); ++i) {
      curve.values.push_back(parse_real(row[i], id));
    }
    CheckpointMetrics &m = by_id[id];
    m.checkpoint_id = id;
    if (row[1] == "*") {
      if (!aggregate_seen.insert(id).second) {
        throw ValidationError("metrics table: duplicate aggregate row for " + id);
      }
      m.task_count = static_cast<std::size_t>(parse_int(row[2], id));
      m.n_min = parse_int(row[3], id);
      m.n_max = parse_int(row[4], id);
      m.pass1 = parse_real(row[5], id);
      m.passk = std::move(curve);
    } else {
      m.per_benchmark[row[1]] = std::move(curve);
    }
  }
  std::vector<CheckpointMetrics> out;
  for (auto &[id, m] : by_id) {
    if (!aggregate_seen.contains(id)) {
      throw ValidationError("metrics table: no aggregate row for " + id);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string read_text_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kLeft = 90.0;
constexpr double kRight = 40.0;
constexpr double kTop = 60.0;
constexpr double kBottom = 80.0;

std::string fmt(const char *pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::string xml_escape(const std::string &s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
    case '&':
      out += "&amp;";
      break;
    case '<':
      out += "&lt;";
      break;
    case '>':
      out += "&gt;";
      break;
    case '"':
      out += "&quot;";
      break;
    default:
      out += ch;
    }
  }
  return out;
}

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (hi - lo <= 0.0) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

} // namespace

std::string plot_scatter(std::span<const LabeledPoint> points, const LinearFit &fit, const PlotLabels &labels,
                         std::optional<double> r2) {
  if (points.empty()) {
    throw ValidationError("plot needs at least one point");
  }
  double xmin = points.front().x, xmax = xmin;
  double ymin = points.front().y, ymax = ymin;
  for (const auto &p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("plot point " + p.checkpoint_id + " is not finite");
    }
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const Range xr = padded(xmin, xmax);
  const double fy0 = fit(xr.lo);
  const double fy1 = fit(xr.hi);
  const Range yr = padded(std::min({ymin, fy0, fy1}), std::max({ymax, fy0, fy1}));

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  if (!labels.title.empty()) {
    svg << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
        << xml_escape(labels.title) << "</text>\n";
  }
  // Axes.
  svg << "<line x1=\"" << fmt("%.2f", kLeft) << "\" y1=\"" << fmt("%.2f", kTop + ph) << "\" x2=\""
      << fmt("%.2f", kLeft + pw) << "\" y2=\"" << fmt("%.2f", kTop + ph) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fmt("%.2f", kLeft) << "\" y1=\"" << fmt("%.2f", kTop) << "\" x2=\"" << fmt("%.2f", kLeft)
      << "\" y2=\"" << fmt("%.2f", kTop + ph) << "\" stroke=\"black\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double t = static_cast<double>(i) / kTicks;
    const double xv = xr.lo + t * (xr.hi - xr.lo);
    const double yv = yr.lo + t * (yr.hi - yr.lo);
    svg << "<line x1=\"" << fmt("%.2f", sx(xv)) << "\" y1=\"" << fmt("%.2f", kTop + ph) << "\" x2=\""
        << fmt("%.2f", sx(xv)) << "\" y2=\"" << fmt("%.2f", kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt("%.2f", sx(xv)) << "\" y=\"" << fmt("%.2f", kTop + ph + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << fmt("%.3g", xv)
        << "</text>\n";
    svg << "<line x1=\"" << fmt("%.2f", kLeft - 5) << "\" y1=\"" << fmt("%.2f", sy(yv)) << "\" x2=\""
        << fmt("%.2f", kLeft) << "\" y2=\"" << fmt("%.2f", sy(yv)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt("%.2f", kLeft - 8) << "\" y=\"" << fmt("%.2f", sy(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << fmt("%.3g", yv) << "</text>\n";
  }
  svg << "<text x=\"" << fmt("%.2f", kLeft + pw / 2) << "\" y=\"" << fmt("%.2f", kHeight - 25)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(labels.x_label)
      << "</text>\n";
  svg << "<text x=\"25\" y=\"" << fmt("%.2f", kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 25 "
      << fmt("%.2f", kTop + ph / 2) << ")\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(labels.y_label) << "</text>\n";
  // Fit.
  svg << "<line class=\"fit\" x1=\"" << fmt("%.2f", sx(xr.lo)) << "\" y1=\"" << fmt("%.2f", sy(fy0)) << "\" x2=\""
      << fmt("%.2f", sx(xr.hi)) << "\" y2=\"" << fmt("%.2f", sy(fy1))
      << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  for (const auto &p : points) {
    svg << "<circle cx=\"" << fmt("%.2f", sx(p.x)) << "\" cy=\"" << fmt("%.2f", sy(p.y))
        << "\" r=\"5\" fill=\"#1f77b4\"><title>" << xml_escape(p.checkpoint_id) << "</title></circle>\n";
  }
  if (r2) {
    svg << "<text x=\"" << fmt("%.2f", kLeft + 10) << "\" y=\"" << fmt("%.2f", kTop + 18)
        << "\" font-family=\"sans-serif\" font-size=\"14\">R² = " << fmt("%.3f", *r2) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

} // namespace rlready
