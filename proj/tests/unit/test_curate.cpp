// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rlready/curate.hpp"
#include "rlready/error.hpp"

using namespace rlready;

namespace {

SftExample ex(const std::string &id, std::int64_t length) { return SftExample{id, "p", "", length}; }

std::vector<std::string> ids(const std::vector<SftExample> &v) {
  std::vector<std::string> out;
  for (const auto &e : v) {
    out.push_back(e.example_id);
  }
  return out;
}

CurationSpec spec(Strategy s, std::size_t count, std::uint64_t seed = 0) {
  CurationSpec c;
  c.strategy = s;
  c.count = count;
  c.seed = seed;
  return c;
}

std::vector<SftExample> corpus(std::size_t count, bool distinct_lengths) {
  std::vector<SftExample> out;
  std::mt19937_64 rng(77);
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = distinct_lengths ? static_cast<std::int64_t>((i * 7919) % count) : static_cast<std::int64_t>(rng() % 40);
    char id[16];
    std::snprintf(id, sizeof id, "ex%05zu", i);
    out.push_back(ex(id, len));
  }
  return out;
}

} // namespace

TEST_SUITE("curate") {

TEST_CASE("measure_length") {
  CHECK(measure_length("a b  c", LengthFn::WhitespaceTokens) == 3);
  CHECK(measure_length("", LengthFn::Chars) == 0);
  CHECK(measure_length("abc", LengthFn::Chars) == 3);
  CHECK(measure_length("", LengthFn::WhitespaceTokens) == 0);
  CHECK(measure_length("  \n\t ", LengthFn::WhitespaceTokens) == 0);
  CHECK(measure_length("\xc3\xa9t\xc3\xa9", LengthFn::Chars) == 3);
  CHECK(measure_length("x\n\ny", LengthFn::WhitespaceTokens) == 2);
  std::vector<SftExample> v{SftExample{"a", "p", "one two", 0}, SftExample{"b", "p", "", 9}};
  measure_lengths(v, LengthFn::WhitespaceTokens);
  CHECK(v[0].length == 2);
  CHECK(v[1].length == 0);
}

TEST_CASE("length fn and strategy names") {
  CHECK(parse_length_fn("chars") == LengthFn::Chars);
  CHECK(parse_length_fn("whitespace_tokens") == LengthFn::WhitespaceTokens);
  CHECK_THROWS_AS(parse_length_fn("tokens"), ValidationError);
  for (const auto s : {Strategy::Shortest, Strategy::Longest, Strategy::Random, Strategy::Mixture}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("median"), ValidationError);
}

TEST_CASE("select examples") {
  const std::vector<SftExample> d{ex("a", 5), ex("b", 3), ex("c", 9)};
  CHECK(ids(select(d, spec(Strategy::Shortest, 2))) == std::vector<std::string>{"a", "b"});
  const std::vector<SftExample> tie{ex("a", 5), ex("b", 5), ex("c", 9)};
  CHECK(ids(select(tie, spec(Strategy::Shortest, 1))) == std::vector<std::string>{"a"});
  CHECK(ids(select(tie, spec(Strategy::Longest, 2))) == std::vector<std::string>{"a", "c"});

  CurationSpec mix = spec(Strategy::Mixture, 2);
  mix.mixture_parts = {{Strategy::Shortest, 1}, {Strategy::Longest, 1}};
  CHECK(ids(select(d, mix)) == std::vector<std::string>{"b", "c"});
}

TEST_CASE("mixture backfills duplicates") {
  const std::vector<SftExample> d{ex("a", 1), ex("b", 2), ex("c", 3)};
  CurationSpec mix = spec(Strategy::Mixture, 3);
  mix.mixture_parts = {{Strategy::Shortest, 2}, {Strategy::Longest, 1}};
  CHECK(ids(select(d, mix)) == std::vector<std::string>{"a", "b", "c"});
  mix.mixture_parts = {{Strategy::Shortest, 2}, {Strategy::Shortest, 1}};
  CHECK(ids(select(d, mix)) == std::vector<std::string>{"a", "b", "c"});

  const std::vector<SftExample> four{ex("a", 1), ex("b", 2), ex("c", 3), ex("d", 4)};
  CurationSpec overlap = spec(Strategy::Mixture, 3);
  overlap.mixture_parts = {{Strategy::Longest, 2}, {Strategy::Longest, 1}};
  CHECK(ids(select(four, overlap)) == std::vector<std::string>{"b", "c", "d"});
}

TEST_CASE("select errors") {
  const std::vector<SftExample> d{ex("a", 5), ex("b", 3)};
  CHECK_THROWS_AS(select(d, spec(Strategy::Shortest, 3)), ValidationError);
  CHECK_THROWS_AS(select(d, spec(Strategy::Shortest, 0)), ValidationError);
  CurationSpec bad_sum = spec(Strategy::Mixture, 2);
  bad_sum.mixture_parts = {{Strategy::Shortest, 1}};
  CHECK_THROWS_AS(select(d, bad_sum), ValidationError);
  CurationSpec no_parts = spec(Strategy::Mixture, 1);
  CHECK_THROWS_AS(select(d, no_parts), ValidationError);
  CurationSpec stray = spec(Strategy::Random, 1);
  stray.mixture_parts = {{Strategy::Shortest, 1}};
  CHECK_THROWS_AS(select(d, stray), ValidationError);
  CurationSpec nested = spec(Strategy::Mixture, 1);
  nested.mixture_parts = {{Strategy::Mixture, 1}};
  CHECK_THROWS_AS(select(d, nested), ValidationError);
  const std::vector<SftExample> dup{ex("a", 5), ex("a", 3)};
  CHECK_THROWS_AS(select(dup, spec(Strategy::Shortest, 1)), ValidationError);
}

TEST_CASE("select is deterministic and order independent") {
  auto d = corpus(300, false);
  std::mt19937 rng(8);
  for (const auto strategy : {Strategy::Shortest, Strategy::Longest, Strategy::Random}) {
    const auto base = select(d, spec(strategy, 50, 9));
    CHECK(base.size() == 50);
    CHECK(std::is_sorted(base.begin(), base.end(),
                         [](const SftExample &a, const SftExample &b) { return a.example_id < b.example_id; }));
    auto shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(select(shuffled, spec(strategy, 50, 9)) == base);
  }
  CHECK(select(d, spec(Strategy::Random, 50, 9)) != select(d, spec(Strategy::Random, 50, 10)));
}

TEST_CASE("shortest and longest are complementary on distinct lengths") {
  const auto d = corpus(200, true);
  for (const std::size_t n : {1u, 50u, 100u, 199u}) {
    const auto s = select(d, spec(Strategy::Shortest, n));
    const auto l = select(d, spec(Strategy::Longest, d.size() - n));
    std::set<std::string> all;
    for (const auto &e : s) {
      all.insert(e.example_id);
    }
    for (const auto &e : l) {
      CHECK(all.insert(e.example_id).second);
    }
    CHECK(all.size() == d.size());
    const auto max_short = std::max_element(s.begin(), s.end(), [](auto &a, auto &b) { return a.length < b.length; });
    const auto min_long = std::min_element(l.begin(), l.end(), [](auto &a, auto &b) { return a.length < b.length; });
    CHECK(max_short->length < min_long->length);
  }
}

TEST_CASE("split_validation") {
  const auto ten = corpus(10, true);
  const auto split = split_validation(ten, 0.2, 4);
  CHECK(split.train.size() == 8);
  CHECK(split.validation.size() == 2);
  std::set<std::string> seen;
  for (const auto &e : split.train) {
    seen.insert(e.example_id);
  }
  for (const auto &e : split.validation) {
    CHECK(seen.insert(e.example_id).second);
  }
  CHECK(seen.size() == 10);
  const auto again = split_validation(ten, 0.2, 4);
  CHECK(again.train == split.train);
  CHECK(again.validation == split.validation);
  CHECK(split_validation(ten, 0.05, 4).validation.size() == 1);
  CHECK_THROWS_AS(split_validation(ten, 0.0, 4), ValidationError);
  CHECK_THROWS_AS(split_validation(ten, 1.0, 4), ValidationError);
  CHECK_THROWS_AS(split_validation(ten, 0.96, 4), ValidationError);
  const std::vector<SftExample> one{ex("a", 1)};
  CHECK_THROWS_AS(split_validation(one, 0.5, 4), ValidationError);
}

}
