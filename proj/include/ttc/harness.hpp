#pragma once

/**
 * Benchmark evaluation: run one method over a list of knob values, grade the
 * answers, and turn the graded records into a scaling curve and a
 * Control/Scaling/Performance report.
 *
 * Knob meaning per method:
 *   budget_forcing     forced continuations N, or the thinking cap when
 *                      SweepSpec::bf_knob == thinking_cap (a_max = cap)
 *   token_conditional  instructed token bucket (a_max = bucket)
 *   step_conditional   instructed steps (a_max = 100 x steps)
 *   class_conditional  0 = short, 1 = long, 2 = no instruction (reference
 *                      for Control, not a curve point)
 *   rejection          thinking budget (a_max = budget)
 *   majority_vote      number of ballots k; compute = total thinking tokens
 *                      across the k samples
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttc/budget_forcing.hpp"
#include "ttc/core_types.hpp"
#include "ttc/lm_backend.hpp"
#include "ttc/metrics.hpp"

namespace ttc {

struct Benchmark {
  std::string name;
  std::vector<BenchmarkQuestion> questions;

  /// Nonempty, unique ids, gold answers valid for their kind.
  void validate() const;
};

Benchmark load_benchmark(const std::filesystem::path& path, std::string name = {});

enum class SweepMethod {
  budget_forcing,
  token_conditional,
  step_conditional,
  class_conditional,
  rejection,
  majority_vote,
};

std::string_view to_string(SweepMethod m);
SweepMethod sweep_method_from_string(std::string_view s);

enum class BfKnob { continuations, thinking_cap };

struct SweepSpec {
  SweepMethod method = SweepMethod::budget_forcing;
  std::vector<std::uint64_t> knob_values;
  DecodeParams decode{};
  BudgetPolicy policy{};                // delimiters, prefix, cap for continuation sweeps
  std::optional<ControlBounds> bounds;  // overrides the per-method rule when set
  BfKnob bf_knob = BfKnob::continuations;
  bool enforce = false;                 // token/step: budget-forced variant
  std::uint64_t max_tries = 1000;       // rejection
  std::size_t jobs = 1;

  void validate() const;
};

/// One graded generation as persisted in records JSONL.
struct ScoredRecord {
  std::string benchmark;
  std::string method;
  std::uint64_t knob = 0;
  ControlBounds bounds;
  std::string gold;
  AnswerKind answer_kind = AnswerKind::exact_string;
  bool correct = false;
  std::uint64_t sample_index = 0;  // ballot index for majority voting
  json extra = json::object();     // method-specific details (steps_used, ...)
  GenerationRecord record;

  bool operator==(const ScoredRecord&) const = default;
};

void to_json(json& j, const ScoredRecord& r);
void from_json(const json& j, ScoredRecord& r);

struct KnobSummary {
  std::uint64_t knob = 0;
  EvalPoint point;
  ControlBounds bounds;
  std::size_t questions = 0;
  std::optional<double> mean_tries;  // rejection only
};

struct SweepSummary {
  std::string benchmark;
  std::string method;
  std::vector<KnobSummary> knobs;  // ascending knob
  ScalingCurve curve;
  MethodReport report;
};

/// Recomputes everything from graded records (answers are re-matched against
/// the stored gold). Record order does not matter. Throws ValidationError for
/// mixed benchmarks/methods or an empty input.
SweepSummary summarize(std::span<const ScoredRecord> records);

struct SweepResult {
  SweepSummary summary;
  std::vector<ScoredRecord> records;  // knob-major, question order
};

/// Runs every knob value in order; questions of one knob run on `spec.jobs`
/// workers. Per-question failures are recorded as incorrect.
SweepResult run_sweep(const Benchmark& benchmark, const SweepSpec& spec, const Backend& backend);

/// "method,knob,compute,accuracy[,mean_tries]" rows in knob order.
std::string sweep_csv(const SweepSummary& summary);

json report_json(const SweepSummary& summary);

struct BootstrapInterval {
  double lower = 0.0;  // percentage points
  double upper = 0.0;
  double observed = 0.0;
};

/// Percentile interval of the paired difference in accuracy (variant minus
/// baseline, in points) over `resamples` resamples of the questions.
BootstrapInterval bootstrap_ci(std::span<const bool> baseline, std::span<const bool> variant,
                               std::size_t resamples = 10000, double level = 0.95, std::uint64_t seed = 0);

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first exception by
/// index after all tasks finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace ttc
