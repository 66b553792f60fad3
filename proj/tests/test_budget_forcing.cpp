#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "ttc/budget_forcing.hpp"
#include "ttc/errors.hpp"

using namespace ttc;
using ttc::testing::make_script;
using ttc::testing::single_script_backend;

namespace {

GenerationRecord run(const MockScript& s, BudgetPolicy p, MockConfig cfg = {}) {
  const MockBackend mock = single_script_backend(s, std::move(cfg));
  return run_budget_forced("Q", p, mock, DecodeParams{});
}

BudgetPolicy policy(std::optional<std::uint64_t> cap, std::uint64_t n) {
  BudgetPolicy p;
  p.max_thinking_tokens = cap;
  p.forced_continuations = n;
  return p;
}

}  // namespace

TEST_CASE("natural stop without intervention") {
  const auto rec = run(make_script({{3, true}, {2, false}}, "The answer is \\boxed{42}"), policy({}, 0));
  CHECK(rec.thinking_text == "s0_0 s0_1 s0_2");
  CHECK(rec.thinking_tokens == 3);
  CHECK(rec.stop_reason == StopReason::natural);
  CHECK_FALSE(rec.forced_exit);
  CHECK_FALSE(rec.answer_prefix_applied);
  CHECK(rec.wait_insertions == 0);
  CHECK(rec.extracted_answer == "42");
  CHECK(rec.transcript == "Q\n<|im_start|>think\ns0_0 s0_1 s0_2\n<|im_start|>answer\nThe answer is \\boxed{42}");
  CHECK(rec.question_id == content_hash_id("Q"));
}

TEST_CASE("forced continuations suppress the delimiter") {
  const MockScript s = make_script({{3, true}, {2, true}, {4, false}}, "42");
  SUBCASE("one continuation") {
    const auto rec = run(s, policy({}, 1));
    CHECK(rec.thinking_text == "s0_0 s0_1 s0_2 Wait s1_0 s1_1");
    CHECK(rec.thinking_tokens == 6);
    CHECK(rec.wait_insertions == 1);
    CHECK(rec.stop_reason == StopReason::natural);
  }
  SUBCASE("more continuations than stop attempts") {
    const auto rec = run(s, policy({}, 10));
    CHECK(rec.wait_insertions == 3);
    CHECK(rec.thinking_text == "s0_0 s0_1 s0_2 Wait s1_0 s1_1 Wait s2_0 s2_1 s2_2 s2_3 Wait");
    CHECK(rec.thinking_tokens == 12);
    CHECK(rec.stop_reason == StopReason::natural);
    CHECK(rec.extracted_answer == "42");
  }
  SUBCASE("the answer can change after waiting") {
    MockScript t = s;
    t.segments[1].answer_override = "7";
    CHECK(run(t, policy({}, 0)).extracted_answer == "42");
    CHECK(run(t, policy({}, 1)).extracted_answer == "7");
  }
}

TEST_CASE("thinking cap forces an early exit with the answer prefix") {
  const auto rec = run(make_script({{10, true}}, "42"), policy(4, 0));
  CHECK(rec.thinking_tokens == 4);
  CHECK(rec.thinking_text == "s0_0 s0_1 s0_2 s0_3");
  CHECK(rec.stop_reason == StopReason::budget_exhausted);
  CHECK(rec.forced_exit);
  CHECK(rec.answer_prefix_applied);
  CHECK(rec.transcript.find("\n<|im_start|>answer\nFinal Answer:") != std::string::npos);
  CHECK(rec.answer_tokens_with_prefix == rec.answer_tokens + 2);
  CHECK(rec.extracted_answer == "42");
}

TEST_CASE("no answer prefix when the policy has none") {
  BudgetPolicy p = policy(4, 0);
  p.answer_prefix.reset();
  const auto rec = run(make_script({{10, true}}, "42"), p);
  CHECK(rec.forced_exit);
  CHECK_FALSE(rec.answer_prefix_applied);
  CHECK(rec.transcript.find("Final Answer:") == std::string::npos);
}

TEST_CASE("continuation only inserted when it fits the budget") {
  SUBCASE("fits exactly") {
    const auto rec = run(make_script({{3, true}, {5, false}}, "1"), policy(4, 3));
    CHECK(rec.wait_insertions == 1);
    CHECK(rec.thinking_tokens == 4);
    CHECK(rec.stop_reason == StopReason::budget_exhausted);
  }
  SUBCASE("does not fit") {
    BudgetPolicy p = policy(4, 3);
    p.continuation_string = "Wait a moment";
    const auto rec = run(make_script({{3, true}, {5, false}}, "1"), p);
    CHECK(rec.wait_insertions == 0);
    CHECK(rec.thinking_tokens == 3);
    CHECK(rec.stop_reason == StopReason::budget_exhausted);
    CHECK(rec.forced_exit);
  }
}

TEST_CASE("loop guard ends runaway thinking") {
  BudgetPolicy p = policy({}, 0);
  p.max_total_tokens = 5;
  const auto rec = run(make_script({{50, false}}, "1"), p);
  CHECK(rec.thinking_tokens == 5);
  CHECK(rec.loop_guard_hit);
  CHECK(rec.stop_reason == StopReason::context_limit);
  CHECK(rec.answer_text.empty());

  p.forced_continuations = 1;
  const auto rec2 = run(make_script({{2, true}, {50, false}}, "1"), p);
  CHECK(rec2.loop_guard_hit);
  CHECK(rec2.stop_reason == StopReason::continuation_suppressed);
}

TEST_CASE("context window overflow yields a context_limit record") {
  MockConfig cfg;
  cfg.context_window = 20;
  const auto rec = run(make_script({{100, false}}, "1"), policy({}, 0), cfg);
  CHECK(rec.stop_reason == StopReason::context_limit);
  CHECK(rec.thinking_tokens == 18);  // window minus the two prompt tokens
  CHECK_FALSE(rec.forced_exit);
}

TEST_CASE("validation") {
  const MockBackend mock = single_script_backend(make_script({{1, true}}, "1"));
  CHECK_THROWS_AS(run_budget_forced("", BudgetPolicy{}, mock, DecodeParams{}), ValidationError);
  BudgetPolicy bad;
  bad.max_thinking_tokens = 0;
  CHECK_THROWS_AS(run_budget_forced("Q", bad, mock, DecodeParams{}), ConfigError);
}

TEST_CASE("backend errors propagate") {
  CallbackBackend broken([](const GenRequest&) -> GenChunk { throw BackendError("down", false); });
  CHECK_THROWS_AS(run_budget_forced("Q", BudgetPolicy{}, broken, DecodeParams{}), BackendError);
}

TEST_CASE("strip_partial_delimiter") {
  std::string t = "abc <|im_st";
  CHECK(strip_partial_delimiter(t, "<|im_start|>answer") == 7);
  CHECK(t == "abc ");
  t = "abc";
  CHECK(strip_partial_delimiter(t, "<|im_start|>answer") == 0);
  CHECK(render_delimiter("X") == "\nX\n");
}

TEST_CASE("cap is never exceeded on random scripts") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::size_t, bool>> segs;
    const int n_segs = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n_segs; ++k) segs.emplace_back(1 + rng() % 40, rng() % 2 == 0);
    const std::uint64_t cap = 1 + rng() % 100;
    const std::uint64_t n = rng() % 4;
    const auto rec = run(make_script(segs, "5"), policy(cap, n));
    CHECK(rec.thinking_tokens <= cap);
    CHECK(rec.thinking_tokens == whitespace_token_count(rec.thinking_text));
    CHECK(rec.forced_exit == (rec.stop_reason == StopReason::budget_exhausted));
  }
}

TEST_CASE("extrapolation sweep") {
  const MockBackend mock = MockBackend::from_scripts(
      {{"A", make_script({{3, true}, {3, true}, {3, false}}, "1")}, {"B", make_script({{5, true}, {2, false}}, "2")}});
  const std::vector<BenchmarkQuestion> qs{{"a", "A", "1", AnswerKind::exact_string},
                                          {"b", "B", "3", AnswerKind::exact_string}};
  const std::vector<std::uint64_t> ns{0, 1, 2};
  const auto pts = extrapolation_sweep(qs, ns, BudgetPolicy{}, mock, DecodeParams{});
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].point.compute == doctest::Approx(4.0));   // (3 + 5) / 2
  CHECK(pts[1].point.compute == doctest::Approx(7.5));   // (7 + 8) / 2
  CHECK(pts[2].point.compute == doctest::Approx(10.0));  // (11 + 9) / 2: B's stream ends after a Wait
  CHECK(pts[0].point.accuracy == doctest::Approx(50.0));

  const std::vector<std::uint64_t> unsorted{2, 1};
  CHECK_THROWS_AS(extrapolation_sweep(qs, unsorted, BudgetPolicy{}, mock, DecodeParams{}), ValidationError);

  CallbackBackend broken([](const GenRequest&) -> GenChunk { throw BackendError("down", false); });
  const auto failed = extrapolation_sweep(qs, ns, BudgetPolicy{}, broken, DecodeParams{});
  CHECK(failed[0].point.accuracy == 0.0);
  CHECK(failed[0].records[0].stop_reason == StopReason::backend_error);
}
