#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "ttc/curation.hpp"
#include "ttc/errors.hpp"

using namespace ttc;

namespace {

ReasoningSample sample(std::string id, std::string question, std::string domain = "Algebra",
                       std::uint64_t len = 100) {
  ReasoningSample s;
  s.id = std::move(id);
  s.question = std::move(question);
  s.reasoning_trace = "some thinking";
  s.generated_solution = "solution";
  s.reference_solution = "reference";
  s.domain = std::move(domain);
  s.thinking_token_count = len;
  return s;
}

CurationPool pool_of(std::vector<ReasoningSample> v, PoolStage stage) { return CurationPool{std::move(v), stage}; }

}  // namespace

TEST_CASE("pool stage names") {
  for (auto s : {PoolStage::raw, PoolStage::quality_filtered, PoolStage::difficulty_filtered,
                 PoolStage::final_selection}) {
    CHECK(pool_stage_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(pool_stage_from_string("cooked"), ParseError);
}

TEST_CASE("quality filter") {
  const QualityFilterConfig cfg;
  CHECK_FALSE(quality_issue(sample("a", "Find x if 2x = 4."), cfg));

  auto empty = sample("b", "Find x.");
  empty.reasoning_trace = "  ";
  CHECK(quality_issue(empty, cfg)->find("empty") != std::string::npos);

  CHECK(quality_issue(sample("c", "Consider\n+---+---+\n| a | b |\n+---+---+\nFind a."), cfg) == "ascii-art block");
  CHECK(quality_issue(sample("d", "Grid:\n┌──┐\n│  │\n└──┘"), cfg) == "ascii-art block");
  CHECK(quality_issue(sample("e", "As shown in the figure, ABC is a triangle."), cfg)->rfind("figure", 0) == 0);
  CHECK(quality_issue(sample("f", "Steps:\n1. a\n2. b\nThen:\n1) c"), cfg)->find("numbering") != std::string::npos);
  CHECK_FALSE(quality_issue(sample("g", "a - b = c\nx + y = z"), cfg));  // math is not art

  QualityFilterConfig extra;
  extra.extra_patterns = {"proof"};
  CHECK(quality_issue(sample("h", "Give a PROOF of it."), extra) == "pattern: PROOF");

  const auto res = quality_filter(pool_of({sample("a", "ok"), empty}, PoolStage::raw), cfg);
  CHECK(res.pool.stage == PoolStage::quality_filtered);
  CHECK(res.pool.samples.size() == 1);
  REQUIRE(res.removed.size() == 1);
  CHECK(res.removed[0].id == "b");
  CHECK_THROWS_AS(quality_filter(res.pool, cfg), CurationError);
}

TEST_CASE("quality config json is strict") {
  CHECK_THROWS_AS(json::parse(R"({"bogus": 1})").get<QualityFilterConfig>(), ConfigError);
  CHECK_THROWS_AS(json::parse(R"({"extra_patterns": ["("]})").get<QualityFilterConfig>(), ConfigError);
  const auto c = json::parse(R"({"min_art_lines": 5})").get<QualityFilterConfig>();
  CHECK(c.min_art_lines == 5);
  CHECK(c.figure_patterns.size() == 4);
}

TEST_CASE("grading prompt and verdicts") {
  const std::string p = build_grading_prompt("P?", "my attempt", "42");
  CHECK(p.rfind("You are an AI assistant for grading a science problem.\n", 0) == 0);
  CHECK(p.find("# Problem\nP?\n\n## Attempt\nmy attempt\n\n## Correct answer\n42\n\n") != std::string::npos);
  CHECK(p.substr(p.size() - 12) == "out quotes).");

  CHECK(parse_grader_verdict("reasoning...\nYes\n\n") == true);
  CHECK(parse_grader_verdict("No") == false);
  CHECK(parse_grader_verdict("  No  ") == false);
  CHECK_FALSE(parse_grader_verdict("Yes.\n").has_value());
  CHECK_FALSE(parse_grader_verdict("yes").has_value());
  CHECK_FALSE(parse_grader_verdict("Yes\nbut actually maybe").has_value());
  CHECK_FALSE(parse_grader_verdict("").has_value());
}

TEST_CASE("grade_attempt re-asks once on an unparseable reply") {
  int calls = 0;
  CallbackBackend grader([&](const GenRequest& r) {
    ++calls;
    CHECK(r.context.find("## Attempt\n7") != std::string::npos);
    GenChunk c;
    c.text = r.seed == 0 ? "hmm" : "fine\nNo";
    return c;
  });
  const auto g = grade_attempt("q", "m", "P", "7", "8", grader);
  CHECK(calls == 2);
  CHECK(g.correct == false);
  CHECK(g.grader_rationale == "fine\nNo");

  CallbackBackend mute([](const GenRequest&) { return GenChunk{}; });
  CHECK_FALSE(grade_attempt("q", "m", "P", "7", "8", mute).correct.has_value());

  GraderOptions bad;
  bad.context_template = "no placeholder";
  CHECK_THROWS_AS(grade_attempt("q", "m", "P", "7", "8", mute, bad), ConfigError);

  const DifficultyGrade dg{"q", "m", "7", std::nullopt, "r"};
  CHECK(json(dg).get<DifficultyGrade>() == dg);
  CHECK_THROWS_AS(json::parse(R"({"question_id":"q","model_label":"m","extra":1})").get<DifficultyGrade>(),
                  ConfigError);
}

TEST_CASE("difficulty filter") {
  const auto pool = pool_of({sample("a", "A"), sample("b", "B"), sample("c", "C"), sample("d", "D")},
                            PoolStage::quality_filtered);
  const std::vector<std::string> models{"m1", "m2"};
  const std::vector<DifficultyGrade> grades{
      {"a", "m1", "", false, ""}, {"a", "m2", "", false, ""},        // hard: kept
      {"b", "m1", "", true, ""},  {"b", "m2", "", false, ""},        // solved: removed
      {"c", "m1", "", false, ""}, {"c", "m2", "", std::nullopt, ""}, // ungradable: held out
      {"d", "m1", "", false, ""},                                    // missing: held out
  };
  const auto r = difficulty_filter(pool, grades, models);
  CHECK(r.pool.stage == PoolStage::difficulty_filtered);
  REQUIRE(r.pool.samples.size() == 1);
  CHECK(r.pool.samples[0].id == "a");
  REQUIRE(r.removed.size() == 1);
  CHECK(r.removed[0].reason == "solved by m1");
  CHECK(r.held_out.size() == 2);
  CHECK_THROWS_AS(difficulty_filter(pool_of({}, PoolStage::raw), grades, models), CurationError);
}

TEST_CASE("domain classification") {
  const KeywordDomainClassifier kw;
  CHECK(kw.classify(sample("a", "What is the probability of heads?")) == "Probability");
  CHECK(kw.classify(sample("a", "Name the capital of France")) == "Other");

  CallbackBackend lm([](const GenRequest& r) {
    GenChunk c;
    c.text = r.context.find("heads") != std::string::npos ? "Thinking...\nstatistics\n" : "I am unsure";
    return c;
  });
  const LmDomainClassifier cls(lm, {"Statistics", "Geometry"});
  CHECK(cls.classify(sample("a", "coin heads?")) == "Statistics");
  CHECK(cls.classify(sample("a", "A triangle has...")) == "Geometry");  // keyword fallback

  CurationPool pool = pool_of({sample("a", "prime numbers", ""), sample("b", "x", "Fixed")}, PoolStage::raw);
  assign_domains(pool, kw);
  CHECK(pool.samples[0].domain == "Number theory");
  CHECK(pool.samples[1].domain == "Fixed");
}

TEST_CASE("domain index and rank weights") {
  const std::vector<ReasoningSample> v{sample("a", "", "X", 10), sample("b", "", "X", 30), sample("c", "", "Y", 5),
                                       sample("d", "", "X", 30)};
  const auto idx = build_domain_index(v);
  CHECK(idx.domains.at("X") == std::vector<std::size_t>{1, 3, 0});
  CHECK(idx.domains.at("Y") == std::vector<std::size_t>{2});

  const auto w = rank_weights(3);
  CHECK(w[0] == doctest::Approx(4.0 / 7));
  CHECK(w[1] == doctest::Approx(2.0 / 7));
  CHECK(w[2] == doctest::Approx(1.0 / 7));
  CHECK(rank_weights(1) == std::vector<double>{1.0});
}

TEST_CASE("seed eligibility") {
  auto s = sample("a", "q");
  s.gemini_correct = true;
  s.source_dataset = "AIME";
  CHECK(is_seed_eligible(s));
  s.source_dataset = "gpqa";
  CHECK(is_seed_eligible(s));
  s.source_dataset = "MATH";
  s.thinking_token_count = 5600;
  CHECK_FALSE(is_seed_eligible(s));
  s.thinking_token_count = 5601;
  CHECK(is_seed_eligible(s));
  s.gemini_correct = false;
  CHECK_FALSE(is_seed_eligible(s));
  s.gemini_correct.reset();
  CHECK_FALSE(is_seed_eligible(s));

  CHECK_THROWS_AS(json::parse(R"({"aime": ["x"]})").get<SeedRules>(), ConfigError);
  CHECK(json::parse(R"({"math_min_thinking": 10})").get<SeedRules>().math_min_thinking == 10);
}

TEST_CASE("diversity sampling") {
  std::vector<ReasoningSample> v;
  for (int i = 0; i < 30; ++i) {
    v.push_back(sample("q" + std::to_string(i), "Q" + std::to_string(i), i % 3 == 0 ? "A" : "B",
                       static_cast<std::uint64_t>(100 + i)));
  }
  v[4].gemini_correct = true;
  v[4].source_dataset = "aime";
  const auto pool = pool_of(v, PoolStage::difficulty_filtered);

  const auto r = diversity_sample(pool, 10, 123);
  CHECK(r.selection.size() == 10);
  CHECK(r.seeded == 1);
  CHECK(r.selection[0].id == "q4");
  std::set<std::string> ids;
  for (const auto& s : r.selection) ids.insert(s.id);
  CHECK(ids.size() == 10);

  // deterministic per seed
  const auto again = diversity_sample(pool, 10, 123);
  CHECK(again.selection == r.selection);

  CHECK(diversity_sample(pool, 30, 1).selection.size() == 30);
  CHECK_THROWS_AS(diversity_sample(pool, 31, 1), CurationError);
  CHECK_THROWS_AS(diversity_sample(pool_of(v, PoolStage::raw), 5, 1), CurationError);
  auto dup = v;
  dup[1].id = "q0";
  CHECK_THROWS_AS(diversity_sample(pool_of(dup, PoolStage::difficulty_filtered), 5, 1), CurationError);
  auto nodomain = v;
  nodomain[2].domain.clear();
  CHECK_THROWS_AS(diversity_sample(pool_of(nodomain, PoolStage::difficulty_filtered), 5, 1), CurationError);
}

TEST_CASE("n-grams") {
  CHECK(ngram_words("Hello, World!  x-y") == std::vector<std::string>{"hello", "world", "x", "y"});
  CHECK(ngram_words("Ünïcode stays") == std::vector<std::string>{"Ünïcode", "stays"});
  CHECK(word_ngrams("a b c d", 2) == std::vector<std::string>{"a b", "b c", "c d"});
  CHECK(word_ngrams("a b", 3).empty());
  CHECK_THROWS_AS(word_ngrams("a", 0), ValidationError);

  NGramIndex idx(3);
  idx.add("The quick brown fox jumps");
  CHECK(idx.size() == 3);
  CHECK(idx.first_match("see the QUICK, brown dog") == "the quick brown");
  CHECK_FALSE(idx.first_match("quick brown dog").has_value());
}

TEST_CASE("decontamination and dedup") {
  const auto pool = pool_of({sample("a", "one two three four five six seven eight nine"),
                             sample("b", "completely unrelated question text with many words here"),
                             sample("c", "  one two   three four five six seven eight nine  ")},
                            PoolStage::raw);
  const std::vector<std::string> bench{"zero one two three four five six seven eight"};
  const auto d = decontaminate(pool, bench, 8);
  CHECK(d.pool.samples.size() == 1);
  REQUIRE(d.excluded.size() == 2);
  CHECK(d.excluded[0].gram == "one two three four five six seven eight");
  CHECK_THROWS_AS(decontaminate(pool, {}, 8), ValidationError);

  CHECK(dedup_key("  a \n\t b  ") == "a b");
  const auto u = dedup(pool);
  CHECK(u.pool.samples.size() == 2);
  REQUIRE(u.removed.size() == 1);
  CHECK(u.removed[0].reason == "duplicate of a");
}

TEST_CASE("training export round trip") {
  auto s = sample("a", "What is 1+1?");
  s.reasoning_trace = "First, note 1+1.\n\nIt is 2.\n\nDone.";
  s.thinking_token_count = 1500;
  for (auto style : {TrainingStyle::plain, TrainingStyle::token_instruction, TrainingStyle::step_instruction}) {
    CAPTURE(to_string(style));
    ExportOptions opts;
    opts.style = style;
    const auto out = export_training_format(std::vector<ReasoningSample>{s}, opts);
    REQUIRE(out.records.size() == 1);
    const TrainingRecord& r = out.records[0];
    const TrainingRecord back = json(r).get<TrainingRecord>();
    const auto triple = parse_training_record(back, opts);
    CHECK(triple == TrainingTriple{s.question, s.reasoning_trace, s.generated_solution});
    CHECK(r.text.substr(r.loss_mask_spans[0].end - 22, 22) == "<|im_start|>assistant\n");
  }
  ExportOptions tok;
  tok.style = TrainingStyle::token_instruction;
  CHECK(export_training_format(std::vector<ReasoningSample>{s}, tok).records[0].text.find(
            "\n\nThink for up to 2048 tokens.\n") != std::string::npos);
  ExportOptions step;
  step.style = TrainingStyle::step_instruction;
  const auto rs = export_training_format(std::vector<ReasoningSample>{s}, step).records[0];
  CHECK(rs.text.find("Think for up to 4 steps.\n<|im_start|>assistant\n<|im_start|>4 steps left\nFirst") !=
        std::string::npos);

  auto no_gen = s;
  no_gen.generated_solution.clear();
  CHECK(parse_training_record(export_training_format(std::vector<ReasoningSample>{no_gen}).records[0]).solution ==
        "reference");
  auto no_trace = s;
  no_trace.reasoning_trace.clear();
  const auto skipped = export_training_format(std::vector<ReasoningSample>{no_trace});
  CHECK(skipped.records.empty());
  CHECK(skipped.skipped.size() == 1);
}

TEST_CASE("parse_training_record rejects tampered records") {
  const auto s = sample("a", "Q");
  TrainingRecord r = export_training_format(std::vector<ReasoningSample>{s}).records[0];
  auto bad = r;
  bad.solution_span.end -= 1;
  CHECK_THROWS_AS(parse_training_record(bad), ParseError);
  bad = r;
  bad.loss_mask_spans[0].end += 1;
  CHECK_THROWS_AS(parse_training_record(bad), ParseError);
  bad = r;
  bad.text.replace(bad.text.find("answer"), 6, "ANSWER");
  CHECK_THROWS_AS(parse_training_record(bad), ParseError);
  CHECK_THROWS_AS(json::parse(R"({"id":"a","style":"plain","text":"","loss_mask_spans":[[0]],)"
                              R"("question_span":[0,0],"trace_span":[0,0],"solution_span":[0,0]})")
                      .get<TrainingRecord>(),
                  ParseError);
}
