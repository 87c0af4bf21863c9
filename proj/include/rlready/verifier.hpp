// SPDX-License-Identifier: Apache-2.0
//
// Boxed-answer extraction and the answer normalization rule set used to turn
// raw completions into correctness counts.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "rlready/passk.hpp"

namespace rlready {

// Version tag of the normalization rules below. Bump on any rule change;
// reports embed it so scores stay reproducible.
inline constexpr const char *kVerifierRulesVersion = "rlready-norm-v1";

struct Sample {
  std::string checkpoint_id;
  std::string benchmark_id;
  std::string task_id;
  std::int64_t sample_index = 0;
  std::string text;
  // Reported by the endpoint ("stop", "length", ...); empty when unknown.
  std::string finish_reason;

  friend bool operator==(const Sample &, const Sample &) = default;
};

struct GoldAnswer {
  std::string benchmark_id;
  std::string task_id;
  std::string answer;

  friend bool operator==(const GoldAnswer &, const GoldAnswer &) = default;
};

// Contents of the last top-level \boxed{...} in text. Braces nest; escaped
// braces (\{ and \}) do not count. A boxed group that never closes yields
// nullopt, as does text without any marker.
std::optional<std::string> extract_boxed(std::string_view text);

// Canonical form of an answer string. Rules, in order:
//   1. trim surrounding whitespace
//   2. drop \left and \right
//   3. drop $
//   4. collapse whitespace runs to one space (and trim again)
//   5. \dfrac and \tfrac become \frac
//   6. \frac{a}{b} becomes a/b; compound operands are parenthesized
//   7. drop thousands separators (1,000 -> 1000)
//   8. drop trailing zeros of decimals (2.50 -> 2.5, 3.00 -> 3)
//   9. a trailing % (or \%) becomes /100
// The pass repeats until the string stops changing, so
// normalize(normalize(x)) == normalize(x). Case is preserved.
std::string normalize(std::string_view answer);

// True when the normalized strings match or both parse as the same exact
// rational (integer, decimal, or p/q with integer or decimal parts).
bool answers_equal(std::string_view a, std::string_view b);

// Counts correct samples for one task. Samples without a boxed answer are
// incorrect. All samples must share the gold answer's benchmark and task and
// one checkpoint.
TaskOutcome score(std::span<const Sample> samples, const GoldAnswer &gold);

} // namespace rlready
