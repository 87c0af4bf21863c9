// SPDX-License-Identifier: Apache-2.0
//
// Collects n completions per task from an OpenAI-compatible completions
// endpoint into a RecordStore.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlready/store.hpp"
#include "rlready/verifier.hpp"

namespace rlready {

inline constexpr const char *kDefaultPromptSuffix =
    "Let's think step by step and output the final answer within \\boxed{}.";

inline constexpr const char *kApiKeyEnv = "RLREADY_API_KEY";

struct SamplingTask {
  std::string task_id;
  std::string problem;
  std::string benchmark_id;
};

struct SamplingJob {
  std::string endpoint_url;
  std::string model_name;
  // Defaults to model_name when empty.
  std::string checkpoint_id;
  std::vector<SamplingTask> tasks;
  std::int64_t n = 1;
  double temperature = 1.0;
  std::string prompt_suffix = kDefaultPromptSuffix;
  std::int64_t max_concurrency = 1;
  std::int64_t max_tokens = 8192;

  void validate() const;
  std::string effective_checkpoint_id() const { return checkpoint_id.empty() ? model_name : checkpoint_id; }
};

struct SamplerOptions {
  // Attempts per request after the first one.
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  std::chrono::seconds request_timeout{600};
  // Bearer token; read from RLREADY_API_KEY when unset.
  std::optional<std::string> api_key;
  // Called after each sample is durably appended. An exception thrown here
  // stops the run and propagates to the caller.
  std::function<void(const Sample &)> on_written;
};

// The prompt sent for one task: problem text, newline, suffix.
std::string build_prompt(const std::string &problem, const std::string &suffix);

// Request body for one completion.
nlohmann::json build_request(const SamplingJob &job, const std::string &problem);

// Issues the missing (task, sample_index) requests of job and appends each
// completion as a Sample. Samples already in the store for this checkpoint
// are not requested again. Returns the number of samples written by this
// call. Throws PartialCompletionError when some task exhausted its retries.
std::size_t sample_completions(const SamplingJob &job, RecordStore &store, const SamplerOptions &options = {});

// Reads a sampling job from a flat JSON object. Keys: endpoint_url,
// model_name, checkpoint_id, tasks_file (JSONL of {task_id, benchmark,
// problem}, relative to the config), n, temperature, prompt_suffix,
// max_concurrency, max_tokens, store, max_retries, backoff_ms.
struct JobConfig {
  SamplingJob job;
  std::filesystem::path store_root;
  SamplerOptions options;
};
JobConfig load_job_config(const std::filesystem::path &path);

} // namespace rlready
