// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlready/records.hpp"

namespace rlready {

// SHA-256 of a byte string or file contents, lowercase hex.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path &path);

// Append-only JSONL files under one directory, one file per record kind,
// described by manifest.json:
//
//   {"records": {"samples": {"path": "samples.jsonl", "count": 20, "sha256": "..."}},
//    "meta": {...}}
//
// Opening a store drops a trailing partial line left by an interrupted
// write and reconciles the manifest with the files on disk. Appends from
// several threads are serialized.
class RecordStore {
public:
  struct Entry {
    std::string path;
    std::size_t count = 0;
    std::string sha256;
  };

  explicit RecordStore(std::filesystem::path root);
  ~RecordStore();

  RecordStore(const RecordStore &) = delete;
  RecordStore &operator=(const RecordStore &) = delete;

  const std::filesystem::path &root() const { return root_; }
  std::filesystem::path path_for(RecordKind kind) const;
  std::filesystem::path failures_path() const { return root_ / "failures.jsonl"; }

  template <typename Record> void append(RecordKind kind, std::span<const Record> records) {
    std::vector<std::string> lines;
    lines.reserve(records.size());
    for (const auto &r : records) {
      lines.push_back(to_jsonl_line(r));
    }
    append_lines(kind, lines);
  }

  void append_lines(RecordKind kind, std::span<const std::string> lines);

  // Appends a line to failures.jsonl (not tracked by the manifest).
  void append_failure(const nlohmann::json &record);

  void set_meta(const std::string &key, nlohmann::json value);

  std::map<std::string, Entry> manifest() const;

  // Throws ValidationError when a file's line count or hash differs from
  // the manifest.
  void verify() const;

private:
  struct Hasher;

  void write_manifest_locked() const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, std::unique_ptr<Hasher>> hashers_;
  nlohmann::json meta_ = nlohmann::json::object();
};

} // namespace rlready
