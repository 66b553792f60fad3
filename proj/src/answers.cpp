#include "ttc/answers.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <regex>

namespace ttc {

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_all_space(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  static const std::regex number(R"(^-?\d+(\.\d+)?$)");
  std::string str(s);
  if (!std::regex_match(str, number)) return std::nullopt;
  return std::strtod(str.c_str(), nullptr);
}

}  // namespace

std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view tag = "\\boxed{";
  std::size_t pos = text.rfind(tag);
  while (pos != std::string_view::npos) {
    std::size_t i = pos + tag.size();
    int depth = 1;
    std::size_t j = i;
    for (; j < text.size() && depth > 0; ++j) {
      if (text[j] == '{') ++depth;
      if (text[j] == '}') --depth;
    }
    if (depth == 0) return std::string(text.substr(i, j - 1 - i));
    if (pos == 0) break;
    pos = text.rfind(tag, pos - 1);
  }
  return std::nullopt;
}

std::optional<std::string> extract_answer(std::string_view text) {
  if (auto boxed = last_boxed(text)) return std::string(trim(*boxed));

  constexpr std::string_view marker = "Final Answer:";
  if (std::size_t pos = text.rfind(marker); pos != std::string_view::npos) {
    std::string_view rest = text.substr(pos + marker.size());
    while (!rest.empty()) {
      std::size_t nl = rest.find('\n');
      std::string_view line = trim(rest.substr(0, nl));
      if (!line.empty()) return std::string(line);
      if (nl == std::string_view::npos) break;
      rest = rest.substr(nl + 1);
    }
  }

  static const std::regex number(R"((^|[^\w.])(-?\d+(?:\.\d+)?)(?![\w]))");
  std::string str(text);
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(str.begin(), str.end(), number); it != std::sregex_iterator();
       ++it) {
    last = (*it)[2].str();
  }
  return last;
}

std::string normalize_answer(std::string_view answer) {
  std::string s(trim(answer));
  for (bool changed = true; changed;) {
    changed = false;
    std::string_view t = trim(s);
    if (t.size() != s.size()) {
      s = std::string(t);
      changed = true;
    }
    while (!s.empty() && s.back() == '.') {
      s.pop_back();
      changed = true;
    }
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
      s = s.substr(1, s.size() - 2);
      changed = true;
    }
    if (s.rfind("\\boxed{", 0) == 0 && !s.empty() && s.back() == '}') {
      if (auto inner = last_boxed(s); inner && inner->size() + 8 == s.size()) {
        s = *inner;
        changed = true;
      }
    }
  }
  if (auto v = parse_integer(s)) s = std::to_string(*v);
  return s;
}

std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (std::size_t k = i; k < s.size(); ++k) {
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
  }
  long long v = 0;
  auto digits = s.substr(i);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc()) return std::nullopt;
  return s[0] == '-' ? -v : v;
}

bool answer_extractable(std::string_view extracted, AnswerKind kind) {
  std::string norm = normalize_answer(extracted);
  if (norm.empty()) return false;
  if (kind == AnswerKind::integer_000_999) return parse_integer(norm).has_value();
  return true;
}

bool match_answer(std::string_view extracted, std::string_view gold, AnswerKind kind) {
  if (!answer_extractable(extracted, kind)) return false;
  const std::string a = normalize_answer(extracted);
  const std::string b = normalize_answer(gold);
  switch (kind) {
    case AnswerKind::integer_000_999: {
      auto x = parse_integer(a);
      auto y = parse_integer(b);
      return x && y && *x == *y;
    }
    case AnswerKind::boxed_math: {
      const std::string x = strip_all_space(a);
      const std::string y = strip_all_space(b);
      if (x == y) return true;
      auto nx = parse_number(x);
      auto ny = parse_number(y);
      return nx && ny && *nx == *ny;
    }
    case AnswerKind::exact_string:
      return a == b;
  }
  return false;
}

}  // namespace ttc
