#include <random>

#include "doctest.h"
#include "ttc/answers.hpp"

using namespace ttc;

TEST_CASE("extraction order: boxed, then Final Answer, then last number") {
  CHECK(extract_answer("so 12 and \\boxed{7} then \\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
  CHECK(extract_answer("we get 5.\nFinal Answer: 809\n") == "809");
  CHECK(extract_answer("Final Answer:\n\n  x = 3  ") == "x = 3");
  CHECK(extract_answer("first 10 then 20, finally 33.") == "33");
  CHECK(extract_answer("no digits here") == std::nullopt);
  CHECK(extract_answer("word12 is not a number, 4 is") == "4");
}

TEST_CASE("boxed contents respect nesting") {
  CHECK(last_boxed("\\boxed{a{b}c}") == "a{b}c");
  CHECK(last_boxed("\\boxed{unbalanced") == std::nullopt);
  CHECK(last_boxed("\\boxed{1} and \\boxed{2") == "1");
}

TEST_CASE("normalization") {
  CHECK(normalize_answer("  059. ") == "59");
  CHECK(normalize_answer("$\\boxed{809}$") == "809");
  CHECK(normalize_answer("\\boxed{x+1}") == "x+1");
  CHECK(normalize_answer("000") == "0");
  CHECK(normalize_answer("Paris.") == "Paris");
}

TEST_CASE("match_answer by kind") {
  CHECK(match_answer("059", "59", AnswerKind::integer_000_999));
  CHECK(match_answer("\\boxed{809}", "809", AnswerKind::boxed_math));
  CHECK(match_answer("\\frac{1}{2}", "\\frac{1} {2}", AnswerKind::boxed_math));
  CHECK(match_answer("0.50", "0.5", AnswerKind::boxed_math));
  CHECK_FALSE(match_answer("", "0", AnswerKind::integer_000_999));
  CHECK_FALSE(match_answer("abc", "0", AnswerKind::integer_000_999));
  CHECK(match_answer(" Paris. ", "Paris", AnswerKind::exact_string));
  CHECK_FALSE(match_answer("paris", "Paris", AnswerKind::exact_string));
  CHECK_FALSE(answer_extractable("  ", AnswerKind::exact_string));
}

TEST_CASE("integer matching equals numeric comparison on random pairs") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> v(0, 999);
  std::uniform_int_distribution<int> pad(0, 2);
  for (int i = 0; i < 2000; ++i) {
    const int a = v(rng);
    const int b = rng() % 4 == 0 ? a : v(rng);
    const std::string sa = std::string(static_cast<std::size_t>(pad(rng)), '0') + std::to_string(a);
    const std::string sb = std::string(static_cast<std::size_t>(pad(rng)), '0') + std::to_string(b);
    CHECK(match_answer(sa, sb, AnswerKind::integer_000_999) == (a == b));
  }
}
