// SPDX-License-Identifier: Apache-2.0
#include "rlready/sampler.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "rlready/error.hpp"

namespace rlready {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin; // scheme://host[:port]
  std::string path;   // prefix + /v1/completions
};

Endpoint parse_endpoint(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint_url must start with http:// or https://: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  ep.path = prefix + "/v1/completions";
  return ep;
}

struct WorkItem {
  std::size_t task;
  std::int64_t sample_index;
};

struct TaskState {
  std::vector<std::int64_t> pending;
  std::size_t cursor = 0;
  std::map<std::int64_t, Sample> buffered;
  bool failed = false;
};

std::string task_label(const SamplingTask &t) { return t.benchmark_id + "/" + t.task_id; }

template <typename T> T config_value(const json &cfg, const fs::path &path, const char *key, T fallback) {
  if (!cfg.contains(key)) {
    return fallback;
  }
  try {
    return cfg[key].get<T>();
  } catch (const json::exception &) {
    throw ValidationError(path.string() + ": key '" + std::string(key) + "' has the wrong type");
  }
}

} // namespace

void SamplingJob::validate() const {
  if (endpoint_url.empty()) {
    throw ValidationError("sampling job: endpoint_url is required");
  }
  parse_endpoint(endpoint_url);
  if (model_name.empty()) {
    throw ValidationError("sampling job: model_name is required");
  }
  if (n < 1) {
    throw ValidationError("sampling job: n must be >= 1");
  }
  if (!(temperature >= 0.0)) {
    throw ValidationError("sampling job: temperature must be >= 0");
  }
  if (max_concurrency < 1) {
    throw ValidationError("sampling job: max_concurrency must be >= 1");
  }
  if (max_tokens < 1) {
    throw ValidationError("sampling job: max_tokens must be >= 1");
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto &t : tasks) {
    if (t.task_id.empty() || t.benchmark_id.empty()) {
      throw ValidationError("sampling job: every task needs task_id and benchmark");
    }
    if (!seen.emplace(t.benchmark_id, t.task_id).second) {
      throw ValidationError("sampling job: duplicate task " + task_label(t));
    }
  }
}

std::string build_prompt(const std::string &problem, const std::string &suffix) { return problem + "\n" + suffix; }

json build_request(const SamplingJob &job, const std::string &problem) {
  return {{"model", job.model_name},
          {"prompt", build_prompt(problem, job.prompt_suffix)},
          {"temperature", job.temperature},
          {"max_tokens", job.max_tokens},
          {"n", 1}};
}

std::size_t sample_completions(const SamplingJob &job, RecordStore &store, const SamplerOptions &options) {
  job.validate();
  const Endpoint endpoint = parse_endpoint(job.endpoint_url);
  const std::string checkpoint = job.effective_checkpoint_id();
  std::optional<std::string> api_key = options.api_key;
  if (!api_key) {
    if (const char *env = std::getenv(kApiKeyEnv); env != nullptr && *env != '\0') {
      api_key = env;
    }
  }

  store.set_meta("request_template",
                 {{"method", "POST"},
                  {"path", endpoint.path},
                  {"model", job.model_name},
                  {"prompt", "{problem}\n" + job.prompt_suffix},
                  {"temperature", job.temperature},
                  {"max_tokens", job.max_tokens},
                  {"n", 1},
                  {"system_prompt", nullptr}});

  // Indices already stored for this checkpoint.
  std::map<std::pair<std::string, std::string>, std::set<std::int64_t>> existing;
  if (fs::exists(store.path_for(RecordKind::Samples))) {
    for (const auto &s : load_samples(store.path_for(RecordKind::Samples))) {
      if (s.checkpoint_id == checkpoint) {
        existing[{s.benchmark_id, s.task_id}].insert(s.sample_index);
      }
    }
  }

  std::vector<TaskState> states(job.tasks.size());
  std::vector<WorkItem> work;
  for (std::size_t t = 0; t < job.tasks.size(); ++t) {
    const auto &have = existing[{job.tasks[t].benchmark_id, job.tasks[t].task_id}];
    for (std::int64_t i = 0; i < job.n; ++i) {
      if (!have.contains(i)) {
        states[t].pending.push_back(i);
        work.push_back({t, i});
      }
    }
  }

  std::mutex state_mutex;
  std::atomic<std::size_t> next_item{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::size_t written = 0;
  std::size_t failed_tasks = 0;

  // Caller holds state_mutex.
  auto write_sample = [&](const Sample &s) {
    const std::vector<Sample> one{s};
    store.append<Sample>(RecordKind::Samples, one);
    ++written;
    if (options.on_written) {
      options.on_written(s);
    }
  };

  auto flush_ready = [&](TaskState &st) {
    while (st.cursor < st.pending.size()) {
      const auto it = st.buffered.find(st.pending[st.cursor]);
      if (it == st.buffered.end()) {
        break;
      }
      const Sample s = std::move(it->second);
      st.buffered.erase(it);
      ++st.cursor;
      write_sample(s);
    }
  };

  auto worker = [&] {
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(options.request_timeout);
    client.set_write_timeout(std::chrono::seconds(30));
    if (api_key) {
      client.set_bearer_token_auth(*api_key);
    }
    try {
      while (!stop.load()) {
        const std::size_t idx = next_item.fetch_add(1);
        if (idx >= work.size()) {
          break;
        }
        const WorkItem item = work[idx];
        const SamplingTask &task = job.tasks[item.task];
        {
          std::lock_guard lock(state_mutex);
          if (states[item.task].failed) {
            continue;
          }
        }
        const std::string body = build_request(job, task.problem).dump();
        std::optional<Sample> result;
        std::string last_error;
        int attempt = 0;
        for (; attempt <= options.max_retries && !stop.load(); ++attempt) {
          if (attempt > 0) {
            const auto wait = std::chrono::duration<double, std::milli>(
                static_cast<double>(options.initial_backoff.count()) * std::pow(options.backoff_factor, attempt - 1));
            std::this_thread::sleep_for(wait);
          }
          auto res = client.Post(endpoint.path, body, "application/json");
          if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
          }
          if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
          }
          try {
            const json reply = json::parse(res->body);
            const json &choice = reply.at("choices").at(0);
            Sample s;
            s.checkpoint_id = checkpoint;
            s.benchmark_id = task.benchmark_id;
            s.task_id = task.task_id;
            s.sample_index = item.sample_index;
            s.text = choice.at("text").get<std::string>();
            if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
              s.finish_reason = choice["finish_reason"].get<std::string>();
            }
            result = std::move(s);
            break;
          } catch (const json::exception &e) {
            last_error = std::string("malformed response: ") + e.what();
          }
        }

        std::lock_guard lock(state_mutex);
        TaskState &st = states[item.task];
        if (st.failed || stop.load()) {
          continue;
        }
        if (result) {
          st.buffered.emplace(item.sample_index, std::move(*result));
          flush_ready(st);
        } else if (!stop.load()) {
          st.failed = true;
          ++failed_tasks;
          // Completed samples of the failed task are still valid records.
          auto completed = std::move(st.buffered);
          st.buffered.clear();
          for (const auto &[i, s] : completed) {
            write_sample(s);
          }
          store.append_failure({{"checkpoint_id", checkpoint},
                                {"benchmark", task.benchmark_id},
                                {"task_id", task.task_id},
                                {"sample_index", item.sample_index},
                                {"attempts", attempt},
                                {"error", last_error}});
        }
      }
    } catch (...) {
      std::lock_guard lock(state_mutex);
      if (!first_error) {
        first_error = std::current_exception();
      }
      stop.store(true);
    }
  };

  const auto threads = static_cast<std::size_t>(std::min<std::int64_t>(job.max_concurrency,
                                                                       std::max<std::int64_t>(1, static_cast<std::int64_t>(work.size()))));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < threads; ++i) {
    pool.emplace_back(worker);
  }
  for (auto &th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
  if (failed_tasks > 0) {
    throw PartialCompletionError(std::to_string(failed_tasks) + " task(s) failed after retries; see " +
                                     store.failures_path().string(),
                                 store.failures_path().string(), written);
  }
  return written;
}

JobConfig load_job_config(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  if (!cfg.is_object()) {
    throw ValidationError(path.string() + ": expected a flat JSON object");
  }
  static const std::set<std::string> kKeys{"endpoint_url", "model_name",      "checkpoint_id", "tasks_file",
                                           "n",            "temperature",     "prompt_suffix", "max_concurrency",
                                           "max_tokens",   "store",           "max_retries",   "backoff_ms"};
  for (const auto &[key, value] : cfg.items()) {
    if (!kKeys.contains(key)) {
      throw ValidationError(path.string() + ": unknown key '" + key + "'");
    }
    if (value.is_object() || value.is_array()) {
      throw ValidationError(path.string() + ": key '" + key + "' must be a scalar");
    }
  }
  auto require = [&](const char *key) {
    if (!cfg.contains(key)) {
      throw ValidationError(path.string() + ": missing key '" + std::string(key) + "'");
    }
  };
  require("endpoint_url");
  require("model_name");
  require("tasks_file");
  require("n");
  require("store");

  const fs::path base = path.parent_path();
  JobConfig out;
  SamplingJob &job = out.job;
  job.endpoint_url = config_value<std::string>(cfg, path, "endpoint_url", "");
  job.model_name = config_value<std::string>(cfg, path, "model_name", "");
  job.checkpoint_id = config_value<std::string>(cfg, path, "checkpoint_id", "");
  job.n = config_value<std::int64_t>(cfg, path, "n", 1);
  job.temperature = config_value<double>(cfg, path, "temperature", 1.0);
  job.prompt_suffix = config_value<std::string>(cfg, path, "prompt_suffix", kDefaultPromptSuffix);
  job.max_concurrency = config_value<std::int64_t>(cfg, path, "max_concurrency", 1);
  job.max_tokens = config_value<std::int64_t>(cfg, path, "max_tokens", 8192);
  out.options.max_retries = config_value<int>(cfg, path, "max_retries", out.options.max_retries);
  out.options.initial_backoff =
      std::chrono::milliseconds(config_value<std::int64_t>(cfg, path, "backoff_ms", out.options.initial_backoff.count()));
  out.store_root = base / config_value<std::string>(cfg, path, "store", "");

  const fs::path tasks_path = base / config_value<std::string>(cfg, path, "tasks_file", "");
  std::ifstream tasks_in(tasks_path, std::ios::binary);
  if (!tasks_in) {
    throw IoError("cannot open " + tasks_path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(tasks_in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const json t = json::parse(line);
      job.tasks.push_back({t.at("task_id").get<std::string>(), t.at("problem").get<std::string>(),
                           t.at("benchmark").get<std::string>()});
    } catch (const json::exception &e) {
      throw ValidationError(tasks_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  job.validate();
  return out;
}

} // namespace rlready
