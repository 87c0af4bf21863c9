// SPDX-License-Identifier: Apache-2.0
#include "rlready/store.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include "rlready/error.hpp"

namespace rlready {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array kAllKinds{RecordKind::Samples, RecordKind::Outcomes, RecordKind::GenLoss,
                               RecordKind::Labels,  RecordKind::Gold,     RecordKind::Sft};

std::string to_hex(const unsigned char *data, unsigned len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

struct RecordStore::Hasher {
  Hasher() : ctx(EVP_MD_CTX_new()) {
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 init failed");
    }
  }
  ~Hasher() { EVP_MD_CTX_free(ctx); }
  Hasher(const Hasher &) = delete;
  Hasher &operator=(const Hasher &) = delete;

  void update(std::string_view bytes) { EVP_DigestUpdate(ctx, bytes.data(), bytes.size()); }

  // Digest of everything fed so far; the running state is kept.
  std::string peek() const {
    EVP_MD_CTX *copy = EVP_MD_CTX_new();
    EVP_MD_CTX_copy_ex(copy, ctx);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(copy, md, &len);
    EVP_MD_CTX_free(copy);
    return to_hex(md, len);
  }

  EVP_MD_CTX *ctx;
};

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return to_hex(md, len);
}

std::string sha256_file(const fs::path &path) { return sha256_hex(read_file(path)); }

RecordStore::RecordStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) {
    throw IoError("cannot create store directory " + root_.string() + ": " + ec.message());
  }
  const fs::path manifest_path = root_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      const json m = json::parse(read_file(manifest_path));
      if (m.contains("meta") && m["meta"].is_object()) {
        meta_ = m["meta"];
      }
    } catch (const json::parse_error &e) {
      throw ValidationError("corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
  }
  for (const auto kind : kAllKinds) {
    const fs::path p = path_for(kind);
    if (!fs::exists(p)) {
      continue;
    }
    std::string content = read_file(p);
    const auto last_newline = content.find_last_of('\n');
    const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (keep != content.size()) {
      content.resize(keep);
      fs::resize_file(p, keep);
    }
    auto hasher = std::make_unique<Hasher>();
    hasher->update(content);
    Entry e;
    e.path = p.filename().string();
    e.count = static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
    e.sha256 = hasher->peek();
    entries_[to_string(kind)] = e;
    hashers_[to_string(kind)] = std::move(hasher);
  }
  std::lock_guard lock(mutex_);
  write_manifest_locked();
}

RecordStore::~RecordStore() = default;

fs::path RecordStore::path_for(RecordKind kind) const { return root_ / (std::string(to_string(kind)) + ".jsonl"); }

void RecordStore::append_lines(RecordKind kind, std::span<const std::string> lines) {
  std::string block;
  for (const auto &l : lines) {
    if (l.find('\n') != std::string::npos) {
      throw ValidationError("record line contains a newline");
    }
    block += l;
    block += '\n';
  }
  std::lock_guard lock(mutex_);
  const std::string name = to_string(kind);
  {
    std::ofstream out(path_for(kind), std::ios::binary | std::ios::app);
    if (!out) {
      throw IoError("cannot append to " + path_for(kind).string());
    }
    out << block;
    out.flush();
    if (!out) {
      throw IoError("append failed for " + path_for(kind).string());
    }
  }
  auto &hasher = hashers_[name];
  if (!hasher) {
    hasher = std::make_unique<Hasher>();
  }
  hasher->update(block);
  Entry &e = entries_[name];
  e.path = path_for(kind).filename().string();
  e.count += lines.size();
  e.sha256 = hasher->peek();
  write_manifest_locked();
}

void RecordStore::append_failure(const json &record) {
  std::lock_guard lock(mutex_);
  std::ofstream out(failures_path(), std::ios::binary | std::ios::app);
  if (!out) {
    throw IoError("cannot append to " + failures_path().string());
  }
  out << record.dump() << '\n';
}

void RecordStore::set_meta(const std::string &key, json value) {
  std::lock_guard lock(mutex_);
  meta_[key] = std::move(value);
  write_manifest_locked();
}

std::map<std::string, RecordStore::Entry> RecordStore::manifest() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void RecordStore::verify() const {
  std::lock_guard lock(mutex_);
  for (const auto &[name, e] : entries_) {
    const std::string content = read_file(root_ / e.path);
    const auto lines = static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
    if (lines != e.count) {
      throw ValidationError("store " + name + ": manifest count " + std::to_string(e.count) + " but file has " +
                            std::to_string(lines) + " lines");
    }
    if (sha256_hex(content) != e.sha256) {
      throw ValidationError("store " + name + ": content hash mismatch");
    }
  }
}

void RecordStore::write_manifest_locked() const {
  json records = json::object();
  for (const auto &[name, e] : entries_) {
    records[name] = {{"path", e.path}, {"count", e.count}, {"sha256", e.sha256}};
  }
  const json m{{"records", records}, {"meta", meta_}};
  const fs::path target = root_ / "manifest.json";
  const fs::path tmp = root_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write " + tmp.string());
    }
    out << m.dump(2) << '\n';
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    throw IoError("cannot replace " + target.string() + ": " + ec.message());
  }
}

} // namespace rlready
