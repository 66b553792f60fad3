#include <algorithm>
#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "ttc/cli.hpp"
#include "ttc/errors.hpp"
#include "ttc/harness.hpp"

using namespace ttc;
using ttc::testing::fixture;

namespace {

std::unique_ptr<Backend> fixture_backend() {
  BackendSection b;
  b.mock_scripts = fixture("mock_scripts.jsonl").string();
  return make_backend(b);
}

ScoredRecord scored(std::string qid, std::uint64_t knob, double thinking, bool correct,
                    std::string method = "budget_forcing") {
  ScoredRecord r;
  r.benchmark = "b";
  r.method = std::move(method);
  r.knob = knob;
  r.gold = "1";
  r.answer_kind = AnswerKind::exact_string;
  r.record.question_id = std::move(qid);
  r.record.thinking_tokens = static_cast<std::uint64_t>(thinking);
  r.record.extracted_answer = correct ? "1" : "0";
  r.correct = correct;
  return r;
}

}  // namespace

TEST_CASE("benchmark loading and validation") {
  const Benchmark b = load_benchmark(fixture("bench.jsonl"));
  CHECK(b.name == "bench");
  CHECK(b.questions.size() == 5);
  CHECK(b.questions[0].kind == AnswerKind::integer_000_999);

  Benchmark dup = b;
  dup.questions[1].id = dup.questions[0].id;
  CHECK_THROWS_AS(dup.validate(), ValidationError);
  const Benchmark empty{"empty", {}};
  CHECK_THROWS_AS(empty.validate(), ValidationError);
  Benchmark bad = b;
  bad.questions[0].gold = "1000";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("sweep spec validation") {
  SweepSpec s;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.knob_values = {2, 1};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.knob_values = {0, 1};
  CHECK_NOTHROW(s.validate());
  s.method = SweepMethod::rejection;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.method = SweepMethod::class_conditional;
  s.knob_values = {0, 1, 3};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(sweep_method_from_string("majority_vote") == SweepMethod::majority_vote);
  CHECK_THROWS_AS(sweep_method_from_string("beam"), ConfigError);
}

TEST_CASE("summarize computes the curve from records") {
  std::vector<ScoredRecord> rs{scored("a", 0, 100, true), scored("b", 0, 300, false), scored("a", 1, 400, true),
                               scored("b", 1, 600, true)};
  for (auto& r : rs) r.bounds.a_max = 450;
  const auto s = summarize(rs);
  REQUIRE(s.knobs.size() == 2);
  CHECK(s.knobs[0].point == EvalPoint{200, 50});
  CHECK(s.knobs[1].point == EvalPoint{500, 100});
  CHECK(s.report.control_pct == 50.0);
  CHECK(*s.report.scaling_slope == doctest::Approx(50.0 / 300.0));
  CHECK(s.report.performance == 100.0);

  // grading is redone from the stored answer, not the stored flag
  auto tampered = rs;
  tampered[1].correct = true;
  CHECK(summarize(tampered).knobs[0].point.accuracy == 50.0);

  auto mixed = rs;
  mixed[0].method = "rejection";
  CHECK_THROWS_AS(summarize(mixed), ValidationError);
  auto missing = rs;
  missing.pop_back();
  CHECK_THROWS_AS(summarize(missing), ValidationError);
  auto twice = rs;
  twice.push_back(rs[0]);
  CHECK_THROWS_AS(summarize(twice), ValidationError);
  CHECK_THROWS_AS(summarize(std::vector<ScoredRecord>{}), ValidationError);
}

TEST_CASE("summarize class-conditional uses the default run as reference") {
  std::vector<ScoredRecord> rs{scored("a", 0, 50, false, "class_conditional"),
                               scored("a", 1, 300, true, "class_conditional"),
                               scored("a", 2, 100, true, "class_conditional")};
  const auto s = summarize(rs);
  CHECK(s.report.control_pct == 100.0);
  CHECK(s.curve.points().size() == 2);
  CHECK(s.report.performance == 100.0);
  rs.pop_back();
  CHECK_THROWS_AS(summarize(rs), ValidationError);
}

TEST_CASE("budget forcing sweep on the fixture benchmark") {
  const auto backend = fixture_backend();
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.knob_values = {0, 1, 2};
  const auto r = run_sweep(bench, spec, *backend);
  CHECK(r.records.size() == 15);
  REQUIRE(r.summary.knobs.size() == 3);
  CHECK(r.summary.knobs[0].point.compute < r.summary.knobs[1].point.compute);
  CHECK(r.summary.knobs[1].point.compute < r.summary.knobs[2].point.compute);
  CHECK(r.summary.report.control_pct == 100.0);  // no cap: unbounded

  const auto csv = sweep_csv(r.summary);
  CHECK(csv.rfind("method,knob,compute,accuracy\nbudget_forcing,0,", 0) == 0);
  const json rep = report_json(r.summary);
  CHECK(rep["benchmark"] == "bench");
  CHECK(rep["knobs"].size() == 3);

  // thread count does not change anything
  spec.jobs = 4;
  const auto p = run_sweep(bench, spec, *backend);
  CHECK(p.records == r.records);
  CHECK(sweep_csv(p.summary) == csv);

  // records survive a JSON round trip
  for (const auto& rec : r.records) CHECK(json(rec).get<ScoredRecord>() == rec);
}

TEST_CASE("thinking-cap sweep bounds each knob") {
  const auto backend = fixture_backend();
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.bf_knob = BfKnob::thinking_cap;
  spec.knob_values = {16, 32, 64};
  const auto r = run_sweep(bench, spec, *backend);
  for (const auto& k : r.summary.knobs) {
    CHECK(k.bounds.a_max == static_cast<double>(k.knob));
    CHECK(k.point.compute <= static_cast<double>(k.knob));
  }
  CHECK(r.summary.report.control_pct == 100.0);
}

TEST_CASE("majority vote sweep reuses ballots across k") {
  const auto backend = fixture_backend();
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.method = SweepMethod::majority_vote;
  spec.knob_values = {1, 3};
  spec.decode.temperature = 1.0;
  const auto r = run_sweep(bench, spec, *backend);
  CHECK(r.records.size() == 5 * (1 + 3));
  // the k=1 ballot is the first k=3 ballot
  for (std::size_t q = 0; q < 5; ++q) {
    const auto& one = r.records[q];
    const auto& three = r.records[5 + 3 * q];
    CHECK(one.record == three.record);
    CHECK(three.sample_index == 0);
    CHECK(r.records[5 + 3 * q + 2].sample_index == 2);
  }
}

TEST_CASE("rejection sweep reports mean tries and failed questions") {
  const auto backend = fixture_backend();
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.method = SweepMethod::rejection;
  spec.knob_values = {60, 1000};
  spec.max_tries = 20;
  spec.decode.temperature = 1.0;
  const auto r = run_sweep(bench, spec, *backend);
  REQUIRE(r.summary.knobs[0].mean_tries);
  CHECK(*r.summary.knobs[1].mean_tries == 1.0);
  CHECK(sweep_csv(r.summary).find(",mean_tries\n") != std::string::npos);
  for (const auto& rec : r.records) {
    if (rec.extra.value("rejection_exhausted", false)) {
      CHECK_FALSE(rec.correct);
      CHECK(rec.record.tries == 20);
    } else {
      CHECK(rec.record.thinking_tokens < rec.knob);
    }
  }
}

TEST_CASE("step and token conditional sweeps") {
  const auto backend = fixture_backend();
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.method = SweepMethod::token_conditional;
  spec.enforce = true;
  spec.knob_values = {32, 64};
  const auto t = run_sweep(bench, spec, *backend);
  CHECK(t.summary.knobs[0].bounds.a_max == 32.0);
  CHECK(t.summary.report.control_pct == 100.0);

  spec.method = SweepMethod::step_conditional;
  spec.knob_values = {1, 2};
  const auto s = run_sweep(bench, spec, *backend);
  CHECK(s.summary.knobs[1].bounds.a_max == 200.0);
  CHECK(s.records[0].extra.contains("steps_used"));
}

TEST_CASE("backend failures become incorrect records") {
  CallbackBackend broken([](const GenRequest&) -> GenChunk { throw BackendError("down", false); });
  const Benchmark bench = load_benchmark(fixture("bench.jsonl"));
  SweepSpec spec;
  spec.knob_values = {0};
  const auto r = run_sweep(bench, spec, broken);
  CHECK(r.summary.knobs[0].point.accuracy == 0.0);
  for (const auto& rec : r.records) {
    CHECK(rec.record.stop_reason == StopReason::backend_error);
    CHECK_FALSE(rec.correct);
  }
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 3) throw ValidationError("task " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "task 3");
  }
}

TEST_CASE("paired bootstrap interval agrees with naive resampling") {
  std::mt19937_64 rng(3);
  std::vector<char> base_c(60), var_c(60);
  for (std::size_t i = 0; i < 60; ++i) {
    base_c[i] = rng() % 100 < 50;
    var_c[i] = rng() % 100 < 60;
  }
  const std::vector<bool> base(base_c.begin(), base_c.end()), var(var_c.begin(), var_c.end());
  const std::unique_ptr<bool[]> b(new bool[60]), v(new bool[60]);
  for (std::size_t i = 0; i < 60; ++i) {
    b[i] = base[i];
    v[i] = var[i];
  }
  const std::span<const bool> bs(b.get(), 60), vs(v.get(), 60);
  const auto ci = bootstrap_ci(bs, vs, 20000, 0.95, 1);

  // oracle: resample question indices directly
  std::vector<double> diffs;
  std::uniform_int_distribution<std::size_t> pick(0, 59);
  for (int r = 0; r < 20000; ++r) {
    int d = 0;
    for (int i = 0; i < 60; ++i) {
      const std::size_t k = pick(rng);
      d += static_cast<int>(var[k]) - static_cast<int>(base[k]);
    }
    diffs.push_back(100.0 * d / 60.0);
  }
  std::sort(diffs.begin(), diffs.end());
  const double lo = diffs[static_cast<std::size_t>(0.025 * 19999)];
  const double hi = diffs[static_cast<std::size_t>(0.975 * 19999)];
  double observed = 0;
  for (std::size_t i = 0; i < 60; ++i) observed += static_cast<double>(var[i]) - static_cast<double>(base[i]);
  CHECK(ci.observed == doctest::Approx(100.0 * observed / 60.0));
  CHECK(std::abs(ci.lower - lo) <= 100.0 / 60.0 + 1e-9);
  CHECK(std::abs(ci.upper - hi) <= 100.0 / 60.0 + 1e-9);
  CHECK(ci.lower <= ci.observed);
  CHECK(ci.observed <= ci.upper);

  CHECK_THROWS_AS(bootstrap_ci(bs, vs.first(10)), ValidationError);
  CHECK_THROWS_AS(bootstrap_ci(bs.first(0), vs.first(0)), ValidationError);
  // identical outcomes: degenerate interval at 0
  const auto same = bootstrap_ci(bs, bs, 1000);
  CHECK(same.lower == 0.0);
  CHECK(same.upper == 0.0);
}
