// SPDX-License-Identifier: Apache-2.0
#include "rlready/verifier.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cctype>

#include "rlready/error.hpp"

namespace rlready {

namespace {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v'; }
bool is_digit(char ch) { return ch >= '0' && ch <= '9'; }
bool is_alpha(char ch) { return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z'); }

// Index one past the brace closing the group opened at text[open], or npos.
std::size_t match_group(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\\') {
      ++i;
      continue;
    }
    if (ch == '{') {
      ++depth;
    } else if (ch == '}') {
      if (--depth == 0) {
        return i + 1;
      }
    }
  }
  return std::string_view::npos;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) {
    ++b;
  }
  while (e > b && is_space(s[e - 1])) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

// Removes a control word such as \left, but not \leftarrow.
std::string drop_command(std::string_view s, std::string_view word) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, word.size(), word) == 0 &&
        (i + word.size() == s.size() || !is_alpha(s[i + word.size()]))) {
      i += word.size();
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string replace_command(std::string_view s, std::string_view word, std::string_view with) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, word.size(), word) == 0 &&
        (i + word.size() == s.size() || !is_alpha(s[i + word.size()]))) {
      out.append(with);
      i += word.size();
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (const char ch : s) {
    if (is_space(ch)) {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) {
      out.push_back(' ');
    }
    pending = false;
    out.push_back(ch);
  }
  return out;
}

bool is_atom(std::string_view s) {
  if (s.empty()) {
    return false;
  }
  for (const char ch : s) {
    if (!is_digit(ch) && !is_alpha(ch) && ch != '.') {
      return false;
    }
  }
  return true;
}

std::string rewrite_fracs(std::string_view s);

// Reads one \frac operand starting at pos: a braced group or a single
// non-space character. Advances pos past it.
std::optional<std::string> frac_operand(std::string_view s, std::size_t &pos) {
  while (pos < s.size() && s[pos] == ' ') {
    ++pos;
  }
  if (pos >= s.size()) {
    return std::nullopt;
  }
  if (s[pos] == '{') {
    const std::size_t end = match_group(s, pos);
    if (end == std::string_view::npos) {
      return std::nullopt;
    }
    std::string inner = trim(rewrite_fracs(s.substr(pos + 1, end - pos - 2)));
    pos = end;
    return inner;
  }
  if (s[pos] == '\\' || s[pos] == '}') {
    return std::nullopt;
  }
  return std::string(1, s[pos++]);
}

std::string rewrite_fracs(std::string_view s) {
  static constexpr std::string_view kFrac = "\\frac";
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, kFrac.size(), kFrac) == 0 &&
        (i + kFrac.size() == s.size() || !is_alpha(s[i + kFrac.size()]))) {
      std::size_t pos = i + kFrac.size();
      auto num = frac_operand(s, pos);
      auto den = num ? frac_operand(s, pos) : std::nullopt;
      if (num && den && !num->empty() && !den->empty()) {
        std::string frac = is_atom(*num) ? *num : "(" + *num + ")";
        frac += '/';
        frac += is_atom(*den) ? *den : "(" + *den + ")";
        // Keep mixed numbers such as 3\frac{1}{2} from fusing into 31/2.
        const bool digit_before = !out.empty() && is_digit(out.back());
        const bool digit_after = pos < s.size() && is_digit(s[pos]);
        out += digit_before || digit_after ? "(" + frac + ")" : frac;
        i = pos;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string strip_thousands(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && is_digit(s[i - 1]) && i + 3 < s.size() && is_digit(s[i + 1]) &&
        is_digit(s[i + 2]) && is_digit(s[i + 3]) && (i + 4 == s.size() || !is_digit(s[i + 4]))) {
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string strip_trailing_zeros(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) && s[i] != '.') {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && (is_digit(s[j]) || s[j] == '.')) {
      ++j;
    }
    std::string run(s.substr(i, j - i));
    const auto dot = run.find('.');
    const bool decimal = dot != std::string::npos && run.find('.', dot + 1) == std::string::npos && dot > 0 &&
                         dot + 1 < run.size();
    if (decimal) {
      while (run.back() == '0') {
        run.pop_back();
      }
      if (run.back() == '.') {
        run.pop_back();
      }
    }
    out += run;
    i = j;
  }
  return out;
}

std::string percent_to_ratio(std::string s) {
  if (!s.empty() && s.back() == '%') {
    s.pop_back();
    if (!s.empty() && s.back() == '\\') {
      s.pop_back();
    }
    s = trim(s);
    if (!s.empty()) {
      s += "/100";
    }
  }
  return s;
}

std::optional<Rational> parse_decimal(std::string_view s) {
  if (s.empty()) {
    return std::nullopt;
  }
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  BigInt digits = 0;
  BigInt scale = 1;
  bool seen_dot = false;
  bool any_digit = false;
  for (const char ch : s) {
    if (ch == '.') {
      if (seen_dot) {
        return std::nullopt;
      }
      seen_dot = true;
      continue;
    }
    if (!is_digit(ch)) {
      return std::nullopt;
    }
    any_digit = true;
    digits = digits * 10 + (ch - '0');
    if (seen_dot) {
      scale *= 10;
    }
  }
  if (!any_digit) {
    return std::nullopt;
  }
  Rational value(digits, scale);
  return negative ? Rational(-value) : value;
}

std::string strip_parens(std::string_view s) {
  std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '(' && t.back() == ')') {
    return trim(std::string_view(t).substr(1, t.size() - 2));
  }
  return t;
}

std::optional<Rational> parse_rational(std::string_view s) {
  std::string t = strip_parens(s);
  const auto slash = t.find('/');
  if (slash == std::string::npos) {
    return parse_decimal(t);
  }
  if (t.find('/', slash + 1) != std::string::npos) {
    return std::nullopt;
  }
  auto num = parse_decimal(strip_parens(std::string_view(t).substr(0, slash)));
  auto den = parse_decimal(strip_parens(std::string_view(t).substr(slash + 1)));
  if (!num || !den || *den == 0) {
    return std::nullopt;
  }
  return Rational(*num / *den);
}

} // namespace

std::optional<std::string> extract_boxed(std::string_view text) {
  static constexpr std::string_view kMarker = "\\boxed";
  std::optional<std::string> last;
  std::size_t pos = 0;
  while ((pos = text.find(kMarker, pos)) != std::string_view::npos) {
    std::size_t open = pos + kMarker.size();
    while (open < text.size() && is_space(text[open])) {
      ++open;
    }
    if (open >= text.size() || text[open] != '{') {
      pos += kMarker.size();
      continue;
    }
    const std::size_t end = match_group(text, open);
    if (end == std::string_view::npos) {
      // Everything after an unclosed box lies inside it.
      return std::nullopt;
    }
    last = std::string(text.substr(open + 1, end - open - 2));
    pos = end;
  }
  return last;
}

static std::string normalize_once(std::string_view answer) {
  std::string s = trim(answer);
  s = drop_command(s, "\\left");
  s = drop_command(s, "\\right");
  std::erase(s, '$');
  s = collapse_spaces(s);
  s = replace_command(s, "\\dfrac", "\\frac");
  s = replace_command(s, "\\tfrac", "\\frac");
  s = rewrite_fracs(s);
  s = strip_thousands(s);
  s = strip_trailing_zeros(s);
  s = percent_to_ratio(std::move(s));
  return s;
}

std::string normalize(std::string_view answer) {
  // Rules can expose new matches for earlier ones (nested or adjacent \frac),
  // so apply the pass until nothing changes.
  std::string current = normalize_once(answer);
  for (;;) {
    std::string next = normalize_once(current);
    if (next == current) {
      return current;
    }
    current = std::move(next);
  }
}

bool answers_equal(std::string_view a, std::string_view b) {
  const std::string na = normalize(a);
  const std::string nb = normalize(b);
  if (na == nb) {
    return true;
  }
  const auto ra = parse_rational(na);
  if (!ra) {
    return false;
  }
  const auto rb = parse_rational(nb);
  return rb && *ra == *rb;
}

TaskOutcome score(std::span<const Sample> samples, const GoldAnswer &gold) {
  if (samples.empty()) {
    throw ValidationError("no samples for task " + gold.benchmark_id + "/" + gold.task_id);
  }
  TaskOutcome out;
  out.checkpoint_id = samples.front().checkpoint_id;
  out.benchmark_id = gold.benchmark_id;
  out.task_id = gold.task_id;
  out.n = static_cast<std::int64_t>(samples.size());
  for (const auto &s : samples) {
    if (s.task_id != gold.task_id || s.benchmark_id != gold.benchmark_id) {
      throw ValidationError("sample for " + s.benchmark_id + "/" + s.task_id + " scored against gold for " +
                            gold.benchmark_id + "/" + gold.task_id);
    }
    if (s.checkpoint_id != out.checkpoint_id) {
      throw ValidationError("mixed checkpoint ids in samples for task " + gold.task_id);
    }
    const auto boxed = extract_boxed(s.text);
    if (boxed && answers_equal(*boxed, gold.answer)) {
      ++out.c;
    }
  }
  return out;
}

} // namespace rlready
