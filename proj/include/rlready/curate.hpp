// SPDX-License-Identifier: Apache-2.0
//
// Length-based SFT subset selection and validation splits.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rlready {

struct SftExample {
  std::string example_id;
  std::string prompt;
  std::string response;
  std::int64_t length = 0;

  friend bool operator==(const SftExample &, const SftExample &) = default;
};

enum class LengthFn {
  // UTF-8 code points of the response.
  Chars,
  // Maximal runs of non-whitespace bytes in the response.
  WhitespaceTokens,
};

const char *to_string(LengthFn fn);
LengthFn parse_length_fn(const std::string &name);

enum class Strategy { Shortest, Longest, Random, Mixture };

const char *to_string(Strategy s);
Strategy parse_strategy(const std::string &name);

struct CurationSpec {
  Strategy strategy = Strategy::Shortest;
  std::size_t count = 0;
  // Non-empty only for Mixture; part counts sum to count.
  std::vector<std::pair<Strategy, std::size_t>> mixture_parts;
  std::uint64_t seed = 0;

  // Throws ValidationError when the invariants above do not hold.
  void validate() const;
};

std::int64_t measure_length(const std::string &response, LengthFn fn);

// Sets length on every example.
void measure_lengths(std::span<SftExample> examples, LengthFn fn);

// Selected examples sorted by example id. Shortest and longest break length
// ties by id; random draws uniformly without replacement from the id-sorted
// dataset; mixture parts are drawn from the full dataset, and an example
// already taken by an earlier part is replaced by that part's next-ranked
// example.
std::vector<SftExample> select(std::span<const SftExample> dataset, const CurationSpec &spec);

struct ValidationSplit {
  std::vector<SftExample> train;
  std::vector<SftExample> validation;
};

// Seeded partition; validation size is max(1, round(fraction * size)).
// Both parts are sorted by id.
ValidationSplit split_validation(std::span<const SftExample> dataset, double validation_fraction,
                                 std::uint64_t seed);

} // namespace rlready
