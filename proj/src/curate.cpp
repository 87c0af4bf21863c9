// SPDX-License-Identifier: Apache-2.0
#include "rlready/curate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rlready/error.hpp"
#include "rlready/random.hpp"

namespace rlready {

namespace {

bool is_ws(unsigned char ch) { return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v'; }

std::vector<const SftExample *> sorted_by_id(std::span<const SftExample> dataset) {
  std::vector<const SftExample *> out;
  out.reserve(dataset.size());
  for (const auto &e : dataset) {
    out.push_back(&e);
  }
  std::sort(out.begin(), out.end(),
            [](const SftExample *a, const SftExample *b) { return a->example_id < b->example_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->example_id == out[i - 1]->example_id) {
      throw ValidationError("duplicate example id " + out[i]->example_id);
    }
  }
  return out;
}

// Full ranking of the dataset under a non-mixture strategy.
std::vector<const SftExample *> ranking(std::span<const SftExample> dataset, Strategy strategy, std::uint64_t seed,
                                        std::uint64_t stream) {
  auto order = sorted_by_id(dataset);
  switch (strategy) {
  case Strategy::Shortest:
    std::stable_sort(order.begin(), order.end(),
                     [](const SftExample *a, const SftExample *b) { return a->length < b->length; });
    break;
  case Strategy::Longest:
    std::stable_sort(order.begin(), order.end(),
                     [](const SftExample *a, const SftExample *b) { return a->length > b->length; });
    break;
  case Strategy::Random: {
    Rng rng = Rng::stream(seed, stream);
    rng.partial_shuffle(order, order.size());
    break;
  }
  case Strategy::Mixture:
    throw ValidationError("mixture has no direct ranking");
  }
  return order;
}

std::vector<SftExample> by_id(std::vector<const SftExample *> picked) {
  std::sort(picked.begin(), picked.end(),
            [](const SftExample *a, const SftExample *b) { return a->example_id < b->example_id; });
  std::vector<SftExample> out;
  out.reserve(picked.size());
  for (const auto *e : picked) {
    out.push_back(*e);
  }
  return out;
}

} // namespace

const char *to_string(LengthFn fn) { return fn == LengthFn::Chars ? "chars" : "whitespace_tokens"; }

LengthFn parse_length_fn(const std::string &name) {
  if (name == "chars") {
    return LengthFn::Chars;
  }
  if (name == "whitespace_tokens") {
    return LengthFn::WhitespaceTokens;
  }
  throw ValidationError("unknown length function '" + name + "' (expected chars or whitespace_tokens)");
}

const char *to_string(Strategy s) {
  switch (s) {
  case Strategy::Shortest:
    return "shortest";
  case Strategy::Longest:
    return "longest";
  case Strategy::Random:
    return "random";
  case Strategy::Mixture:
    return "mixture";
  }
  return "";
}

Strategy parse_strategy(const std::string &name) {
  for (const auto s : {Strategy::Shortest, Strategy::Longest, Strategy::Random, Strategy::Mixture}) {
    if (name == to_string(s)) {
      return s;
    }
  }
  throw ValidationError("unknown strategy '" + name + "' (expected shortest, longest, random or mixture)");
}

void CurationSpec::validate() const {
  if (count == 0) {
    throw ValidationError("curation count must be positive");
  }
  if (strategy != Strategy::Mixture) {
    if (!mixture_parts.empty()) {
      throw ValidationError("mixture parts given for non-mixture strategy " + std::string(to_string(strategy)));
    }
    return;
  }
  if (mixture_parts.empty()) {
    throw ValidationError("mixture strategy needs parts");
  }
  std::size_t total = 0;
  for (const auto &[s, n] : mixture_parts) {
    if (s == Strategy::Mixture) {
      throw ValidationError("mixture parts cannot nest a mixture");
    }
    if (n == 0) {
      throw ValidationError("mixture part counts must be positive");
    }
    total += n;
  }
  if (total != count) {
    throw ValidationError("mixture part counts sum to " + std::to_string(total) + ", expected " +
                          std::to_string(count));
  }
}

std::int64_t measure_length(const std::string &response, LengthFn fn) {
  std::int64_t n = 0;
  if (fn == LengthFn::Chars) {
    for (const char ch : response) {
      if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) {
        ++n;
      }
    }
    return n;
  }
  bool in_token = false;
  for (const char ch : response) {
    const bool ws = is_ws(static_cast<unsigned char>(ch));
    if (!ws && !in_token) {
      ++n;
    }
    in_token = !ws;
  }
  return n;
}

void measure_lengths(std::span<SftExample> examples, LengthFn fn) {
  for (auto &e : examples) {
    e.length = measure_length(e.response, fn);
  }
}

std::vector<SftExample> select(std::span<const SftExample> dataset, const CurationSpec &spec) {
  spec.validate();
  if (spec.count > dataset.size()) {
    throw ValidationError("requested " + std::to_string(spec.count) + " examples from a dataset of " +
                          std::to_string(dataset.size()));
  }
  if (spec.strategy != Strategy::Mixture) {
    auto order = ranking(dataset, spec.strategy, spec.seed, 0);
    order.resize(spec.count);
    return by_id(std::move(order));
  }

  std::set<std::string> taken;
  std::vector<const SftExample *> picked;
  for (std::size_t part = 0; part < spec.mixture_parts.size(); ++part) {
    const auto &[strategy, want] = spec.mixture_parts[part];
    const auto order = ranking(dataset, strategy, spec.seed, part + 1);
    std::size_t got = 0;
    for (std::size_t i = 0; i < order.size() && got < want; ++i) {
      if (taken.insert(order[i]->example_id).second) {
        picked.push_back(order[i]);
        ++got;
      }
    }
    if (got < want) {
      throw ValidationError("mixture part " + std::to_string(part) + " (" + to_string(strategy) +
                            ") exhausted the dataset after " + std::to_string(got) + " of " + std::to_string(want));
    }
  }
  return by_id(std::move(picked));
}

ValidationSplit split_validation(std::span<const SftExample> dataset, double validation_fraction,
                                 std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in (0, 1)");
  }
  auto order = sorted_by_id(dataset);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(order.size()))));
  if (n_val >= order.size()) {
    throw ValidationError("validation fraction " + std::to_string(validation_fraction) + " leaves no training data out of " +
                          std::to_string(order.size()) + " examples");
  }
  Rng rng(seed);
  rng.partial_shuffle(order, n_val);
  ValidationSplit out;
  out.validation = by_id({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val)});
  out.train = by_id({order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end()});
  return out;
}

} // namespace rlready
