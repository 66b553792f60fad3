#include "ttc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "ttc/answers.hpp"
#include "ttc/errors.hpp"
#include "ttc/jsonl.hpp"
#include "ttc/length_control.hpp"
#include "ttc/strategies.hpp"

namespace ttc {

// ============================================================================
// Benchmark
// ============================================================================

void Benchmark::validate() const {
  if (questions.empty()) throw ValidationError("benchmark " + name + " has no questions");
  std::set<std::string> ids;
  for (const auto& q : questions) {
    if (q.id.empty()) throw ValidationError("benchmark question without id");
    if (!ids.insert(q.id).second) throw ValidationError("duplicate question id " + q.id);
    if (q.prompt.empty()) throw ValidationError("question " + q.id + " has an empty prompt");
    if (q.kind == AnswerKind::integer_000_999) {
      const auto v = parse_integer(normalize_answer(q.gold));
      if (!v || *v < 0 || *v > 999) throw ValidationError("question " + q.id + ": gold is not in 000..999");
    }
  }
}

Benchmark load_benchmark(const std::filesystem::path& path, std::string name) {
  Benchmark b;
  b.name = name.empty() ? path.stem().string() : std::move(name);
  b.questions = read_jsonl<BenchmarkQuestion>(path);
  b.validate();
  return b;
}

std::string_view to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::budget_forcing: return "budget_forcing";
    case SweepMethod::token_conditional: return "token_conditional";
    case SweepMethod::step_conditional: return "step_conditional";
    case SweepMethod::class_conditional: return "class_conditional";
    case SweepMethod::rejection: return "rejection";
    case SweepMethod::majority_vote: return "majority_vote";
  }
  return "budget_forcing";
}

SweepMethod sweep_method_from_string(std::string_view s) {
  for (auto m : {SweepMethod::budget_forcing, SweepMethod::token_conditional, SweepMethod::step_conditional,
                 SweepMethod::class_conditional, SweepMethod::rejection, SweepMethod::majority_vote}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown method: " + std::string(s));
}

void SweepSpec::validate() const {
  if (knob_values.empty()) throw ConfigError("sweep needs at least one knob value");
  if (!std::is_sorted(knob_values.begin(), knob_values.end()) ||
      std::adjacent_find(knob_values.begin(), knob_values.end()) != knob_values.end()) {
    throw ConfigError("knob values must be strictly increasing");
  }
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (bounds) bounds->validate();
  policy.validate();
  switch (method) {
    case SweepMethod::budget_forcing:
      if (bf_knob == BfKnob::thinking_cap && knob_values.front() == 0) {
        throw ConfigError("thinking caps must be positive");
      }
      break;
    case SweepMethod::token_conditional:
    case SweepMethod::step_conditional:
    case SweepMethod::rejection:
    case SweepMethod::majority_vote:
      if (knob_values.front() == 0) throw ConfigError(std::string(to_string(method)) + " knobs must be positive");
      break;
    case SweepMethod::class_conditional:
      if (knob_values.back() > 2) throw ConfigError("class_conditional knobs are 0 (short), 1 (long), 2 (default)");
      break;
  }
  if (method == SweepMethod::rejection && max_tries == 0) throw ConfigError("max_tries must be >= 1");
}

// ============================================================================
// Records
// ============================================================================

void to_json(json& j, const ScoredRecord& r) {
  j = json{{"benchmark", r.benchmark},
           {"method", r.method},
           {"knob", r.knob},
           {"bounds", r.bounds},
           {"gold", r.gold},
           {"answer_kind", to_string(r.answer_kind)},
           {"correct", r.correct},
           {"sample_index", r.sample_index},
           {"extra", r.extra},
           {"record", r.record}};
}

void from_json(const json& j, ScoredRecord& r) {
  r.benchmark = j.at("benchmark").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.knob = j.at("knob").get<std::uint64_t>();
  r.bounds = j.value("bounds", json::object()).get<ControlBounds>();
  r.gold = j.at("gold").get<std::string>();
  r.answer_kind = answer_kind_from_string(j.at("answer_kind").get<std::string>());
  r.correct = j.at("correct").get<bool>();
  r.sample_index = j.value("sample_index", std::uint64_t{0});
  r.extra = j.value("extra", json::object());
  r.record = j.at("record").get<GenerationRecord>();
}

namespace {

bool graded_correct(const GenerationRecord& rec, std::string_view gold, AnswerKind kind) {
  return rec.stop_reason != StopReason::backend_error && match_answer(rec.extracted_answer, gold, kind);
}

}  // namespace

SweepSummary summarize(std::span<const ScoredRecord> records) {
  if (records.empty()) throw ValidationError("no records to summarize");
  SweepSummary s;
  s.benchmark = records.front().benchmark;
  s.method = records.front().method;
  const SweepMethod method = sweep_method_from_string(s.method);

  // knob -> question -> records (ballots ordered by sample_index)
  std::map<std::uint64_t, std::map<std::string, std::vector<const ScoredRecord*>>> grouped;
  for (const auto& r : records) {
    if (r.benchmark != s.benchmark) {
      throw ValidationError("records mix benchmarks '" + s.benchmark + "' and '" + r.benchmark + "'");
    }
    if (r.method != s.method) throw ValidationError("records mix methods '" + s.method + "' and '" + r.method + "'");
    grouped[r.knob][r.record.question_id].push_back(&r);
  }

  std::map<std::uint64_t, double> class_compute;
  for (auto& [knob, questions] : grouped) {
    KnobSummary ks;
    ks.knob = knob;
    ks.bounds = questions.begin()->second.front()->bounds;
    double compute = 0.0;
    double tries = 0.0;
    std::size_t correct = 0;
    std::size_t n_records = 0;
    for (auto& [qid, rs] : questions) {
      std::sort(rs.begin(), rs.end(), [](const ScoredRecord* a, const ScoredRecord* b) {
        return a->sample_index < b->sample_index;
      });
      for (const ScoredRecord* r : rs) {
        if (!(r->bounds == ks.bounds)) {
          throw ValidationError("records of knob " + std::to_string(knob) + " disagree on control bounds");
        }
      }
      if (method == SweepMethod::majority_vote) {
        std::vector<std::string> answers;
        double total = 0.0;
        for (const ScoredRecord* r : rs) {
          answers.push_back(r->record.stop_reason == StopReason::backend_error ? std::string()
                                                                                : r->record.extracted_answer);
          total += static_cast<double>(r->record.thinking_tokens);
        }
        const VoteTally tally = majority_vote(answers);
        if (match_answer(tally.winner, rs.front()->gold, rs.front()->answer_kind)) ++correct;
        compute += total;
      } else {
        if (rs.size() != 1) {
          throw ValidationError("question " + qid + " has " + std::to_string(rs.size()) +
                                " records for knob " + std::to_string(knob));
        }
        const ScoredRecord& r = *rs.front();
        if (graded_correct(r.record, r.gold, r.answer_kind)) ++correct;
        compute += static_cast<double>(r.record.thinking_tokens);
        tries += static_cast<double>(r.record.tries);
      }
      ++n_records;
    }
    const double n = static_cast<double>(n_records);
    ks.questions = n_records;
    ks.point = EvalPoint{compute / n, 100.0 * static_cast<double>(correct) / n};
    if (method == SweepMethod::rejection) ks.mean_tries = tries / n;
    class_compute[knob] = ks.point.compute;
    s.knobs.push_back(ks);
  }

  // all knobs must see the same question set
  const auto& first_questions = grouped.begin()->second;
  for (const auto& [knob, questions] : grouped) {
    if (questions.size() != first_questions.size() ||
        !std::equal(questions.begin(), questions.end(), first_questions.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw ValidationError("knob " + std::to_string(knob) + " covers a different question set");
    }
  }

  std::vector<EvalPoint> runs;
  double control = 0.0;
  if (method == SweepMethod::class_conditional) {
    for (const auto& k : s.knobs) {
      if (k.knob <= 1) runs.push_back(k.point);
    }
    if (!class_compute.count(0) || !class_compute.count(1) || !class_compute.count(2)) {
      throw ValidationError("class_conditional needs knobs 0 (short), 1 (long) and 2 (default)");
    }
    control = compute_control_class_conditional(class_compute[0], class_compute[1], class_compute[2]);
  } else {
    std::vector<ControlObservation> obs;
    for (const auto& k : s.knobs) {
      runs.push_back(k.point);
      obs.push_back({k.point.compute, k.bounds});
    }
    control = compute_control(obs);
  }
  s.curve = ScalingCurve::from_runs(std::move(runs), s.method);
  s.report = make_report(s.curve, control);
  return s;
}

// ============================================================================
// Sweep
// ============================================================================

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

ControlBounds bounds_for(const SweepSpec& spec, std::uint64_t knob) {
  if (spec.bounds) return *spec.bounds;
  ControlBounds b;
  switch (spec.method) {
    case SweepMethod::budget_forcing:
      if (spec.bf_knob == BfKnob::thinking_cap) {
        b.a_max = static_cast<double>(knob);
      } else if (spec.policy.max_thinking_tokens) {
        b.a_max = static_cast<double>(*spec.policy.max_thinking_tokens);
      }
      break;
    case SweepMethod::token_conditional: b.a_max = static_cast<double>(control_cap_for(ControlMethod::token, knob)); break;
    case SweepMethod::step_conditional: b.a_max = static_cast<double>(control_cap_for(ControlMethod::step, knob)); break;
    case SweepMethod::rejection: b.a_max = static_cast<double>(knob); break;
    case SweepMethod::class_conditional:
    case SweepMethod::majority_vote: break;
  }
  return b;
}

GenerationRecord failed_record(const BenchmarkQuestion& q, const DecodeParams& decode, const std::string& what) {
  GenerationRecord rec;
  rec.question_id = q.id;
  rec.prompt = q.prompt;
  rec.stop_reason = StopReason::backend_error;
  rec.seed = decode.seed;
  rec.temperature = decode.temperature;
  rec.transcript = "backend error: " + what;
  return rec;
}

/// One generation for (question, knob); `sample` is the ballot index.
ScoredRecord run_one(const Benchmark& bench, const BenchmarkQuestion& q, const SweepSpec& spec,
                     const Backend& backend, std::uint64_t knob, std::uint64_t sample) {
  ScoredRecord out;
  out.benchmark = bench.name;
  out.method = std::string(to_string(spec.method));
  out.knob = knob;
  out.bounds = bounds_for(spec, knob);
  out.gold = q.gold;
  out.answer_kind = q.kind;
  out.sample_index = sample;

  DecodeParams decode = spec.decode;
  try {
    switch (spec.method) {
      case SweepMethod::budget_forcing: {
        BudgetPolicy p = spec.policy;
        if (spec.bf_knob == BfKnob::thinking_cap) {
          p.max_thinking_tokens = knob;
        } else {
          p.forced_continuations = knob;
        }
        out.record = run_budget_forced(q.prompt, p, backend, decode, q.id);
        break;
      }
      case SweepMethod::token_conditional:
        out.record = run_token_conditional(q.prompt, knob, spec.enforce, backend, decode, spec.policy, q.id);
        break;
      case SweepMethod::step_conditional: {
        StepControlOptions opts;
        opts.end_of_thinking_delimiter = spec.policy.end_of_thinking_delimiter;
        opts.max_total_tokens = spec.policy.max_total_tokens;
        StepRunResult r = run_step_conditional(q.prompt, knob, spec.enforce, backend, decode, opts, q.id);
        out.extra = json{{"steps_used", r.steps_used}, {"violation", r.violation}, {"intervened", r.intervened}};
        out.record = std::move(r.record);
        break;
      }
      case SweepMethod::class_conditional: {
        BudgetPolicy p = spec.policy;
        if (knob == 2) {
          p.forced_continuations = 0;
          p.max_thinking_tokens.reset();
          out.record = run_budget_forced(q.prompt, p, backend, decode, q.id);
        } else {
          const auto c = knob == 0 ? ThinkingClass::short_thinking : ThinkingClass::long_thinking;
          out.record = run_class_conditional(q.prompt, c, backend, decode, p, q.id);
        }
        break;
      }
      case SweepMethod::rejection: {
        RejectionConfig cfg;
        cfg.token_budget = knob;
        cfg.temperature = decode.temperature;
        cfg.max_tries = spec.max_tries;
        cfg.seed = decode.seed;
        try {
          out.record = rejection_sample(q.prompt, cfg, backend, spec.policy, decode.tokenizer, q.id).record;
        } catch (const RejectionExhaustedError& e) {
          out.record = e.shortest();
          out.extra = json{{"rejection_exhausted", true}};
        }
        break;
      }
      case SweepMethod::majority_vote:
        decode.seed = spec.decode.seed + static_cast<std::int64_t>(sample);
        out.record = run_budget_forced(q.prompt, spec.policy, backend, decode, q.id);
        break;
    }
  } catch (const BackendError& e) {
    out.record = failed_record(q, decode, e.what());
  }
  out.correct = graded_correct(out.record, q.gold, q.kind);
  if (out.extra.value("rejection_exhausted", false)) out.correct = false;
  return out;
}

}  // namespace

SweepResult run_sweep(const Benchmark& benchmark, const SweepSpec& spec, const Backend& backend) {
  benchmark.validate();
  spec.validate();
  SweepResult result;
  const auto& qs = benchmark.questions;

  if (spec.method == SweepMethod::majority_vote) {
    // draw max(k) ballots once; each knob votes over a prefix
    const std::uint64_t k_max = spec.knob_values.back();
    std::vector<ScoredRecord> ballots(qs.size() * k_max);
    parallel_for(ballots.size(), spec.jobs, [&](std::size_t i) {
      ballots[i] = run_one(benchmark, qs[i / k_max], spec, backend, k_max, i % k_max);
    });
    for (std::uint64_t k : spec.knob_values) {
      for (std::size_t qi = 0; qi < qs.size(); ++qi) {
        for (std::uint64_t s = 0; s < k; ++s) {
          ScoredRecord r = ballots[qi * k_max + s];
          r.knob = k;
          r.bounds = bounds_for(spec, k);
          result.records.push_back(std::move(r));
        }
      }
    }
  } else {
    for (std::uint64_t knob : spec.knob_values) {
      std::vector<ScoredRecord> rows(qs.size());
      parallel_for(qs.size(), spec.jobs,
                   [&](std::size_t i) { rows[i] = run_one(benchmark, qs[i], spec, backend, knob, 0); });
      for (auto& r : rows) result.records.push_back(std::move(r));
    }
  }
  result.summary = summarize(result.records);
  return result;
}

std::string sweep_csv(const SweepSummary& s) {
  const bool tries = std::any_of(s.knobs.begin(), s.knobs.end(), [](const KnobSummary& k) { return k.mean_tries.has_value(); });
  std::string out = "method,knob,compute,accuracy";
  if (tries) out += ",mean_tries";
  out += '\n';
  for (const auto& k : s.knobs) {
    out += s.method + "," + std::to_string(k.knob) + "," + format_number(k.point.compute) + "," +
           format_number(k.point.accuracy);
    if (tries) out += "," + (k.mean_tries ? format_number(*k.mean_tries) : std::string());
    out += '\n';
  }
  return out;
}

json report_json(const SweepSummary& s) {
  json knobs = json::array();
  for (const auto& k : s.knobs) {
    json row{{"knob", k.knob},
             {"compute", k.point.compute},
             {"accuracy", k.point.accuracy},
             {"bounds", k.bounds},
             {"questions", k.questions}};
    if (k.mean_tries) row["mean_tries"] = *k.mean_tries;
    knobs.push_back(std::move(row));
  }
  json j = s.report;
  j["benchmark"] = s.benchmark;
  j["knobs"] = std::move(knobs);
  return j;
}

// ============================================================================
// Bootstrap
// ============================================================================

BootstrapInterval bootstrap_ci(std::span<const bool> baseline, std::span<const bool> variant,
                               std::size_t resamples, double level, std::uint64_t seed) {
  if (baseline.size() != variant.size()) {
    throw ValidationError("paired outcomes differ in length: " + std::to_string(baseline.size()) + " vs " +
                          std::to_string(variant.size()));
  }
  if (baseline.empty()) throw ValidationError("bootstrap needs at least one paired outcome");
  if (resamples == 0) throw ValidationError("resamples must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must be in (0, 1)");

  // A resample only depends on how many of each paired difference (-1, 0, +1)
  // it draws, so drawing those counts from the multinomial is equivalent to
  // resampling question indices.
  const std::size_t n = baseline.size();
  std::size_t up = 0;
  std::size_t down = 0;
  for (std::size_t i = 0; i < n; ++i) {
    up += variant[i] && !baseline[i];
    down += baseline[i] && !variant[i];
  }
  const double nd = static_cast<double>(n);
  const double p_up = static_cast<double>(up) / nd;
  const double p_down_rest = up == n ? 0.0 : static_cast<double>(down) / static_cast<double>(n - up);

  std::mt19937_64 rng(seed);
  std::vector<double> diffs(resamples);
  for (auto& d : diffs) {
    std::binomial_distribution<std::int64_t> draw_up(static_cast<std::int64_t>(n), p_up);
    const std::int64_t u = draw_up(rng);
    std::binomial_distribution<std::int64_t> draw_down(static_cast<std::int64_t>(n) - u, p_down_rest);
    const std::int64_t w = draw_down(rng);
    d = 100.0 * static_cast<double>(u - w) / nd;
  }
  std::sort(diffs.begin(), diffs.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(diffs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, diffs.size() - 1);
    return diffs[lo] + (pos - static_cast<double>(lo)) * (diffs[hi] - diffs[lo]);
  };
  const double alpha = 1.0 - level;
  return BootstrapInterval{quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0),
                           100.0 * (static_cast<double>(up) - static_cast<double>(down)) / nd};
}

}  // namespace ttc
