#pragma once

// Prompt-conditioned length control: token-, step- and class-conditional
// instructions, their budget-forced variants, and the token/step training
// formats.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ttc/budget_forcing.hpp"
#include "ttc/core_types.hpp"
#include "ttc/lm_backend.hpp"

namespace ttc {

inline constexpr std::uint64_t kMinTokenBucket = 1024;
inline constexpr std::uint64_t kTokensPerStepProxy = 100;

struct TokenInstruction {
  std::uint64_t bucket = kMinTokenBucket;  // power of two
};

struct StepInstruction {
  std::uint64_t step_budget = 1;
  std::uint64_t tokens_per_step_proxy = kTokensPerStepProxy;
};

enum class ThinkingClass { short_thinking, long_thinking };

/// The two fixed instructions appended after a blank line.
std::string_view class_prompt_text(ThinkingClass c);

/// Smallest power of two >= value (1 for 0).
std::uint64_t next_power_of_two(std::uint64_t value);

/// Token bucket for a trace length: next power of two, never below
/// `min_bucket` (1024 by default).
std::uint64_t token_bucket(std::uint64_t trace_tokens, std::uint64_t min_bucket = kMinTokenBucket);

/// question + "\n\nThink for up to {bucket} tokens."
std::string build_token_prompt(std::string_view question, std::uint64_t bucket);

/// question + "\n\nThink for up to {steps} steps."
std::string build_step_prompt(std::string_view question, std::uint64_t step_budget);

/// question + "\n\n" + the class instruction.
std::string build_class_prompt(std::string_view question, ThinkingClass c);

/// Splits on blank lines ("\n\n"); blocks are trimmed, empty blocks dropped.
std::vector<std::string> split_steps(std::string_view trace);

/// Step budget for a trace during data construction: next power of two of its
/// step count.
std::uint64_t step_bucket(std::size_t step_count);

/// "<|im_start|>{k} steps left"
std::string step_delimiter(std::int64_t steps_left);

/// Each step prefixed by a countdown delimiter line, starting at
/// `step_budget` so the final step of a full-budget trace is 1. Throws
/// ValidationError for an empty trace or more steps than the budget.
std::string build_step_trace(std::string_view trace, std::uint64_t step_budget);

/// Countdown values and step texts of a rendered step trace, in order.
std::vector<std::pair<std::int64_t, std::string>> parse_step_trace(std::string_view rendered);

enum class ControlMethod { token, step };

/// Proxy token cap used to score Control: the instructed token count, or
/// 100 tokens per instructed step.
std::uint64_t control_cap_for(ControlMethod method, std::uint64_t instructed_value);

// ----------------------------------------------------------------------------
// Controllers
// ----------------------------------------------------------------------------

/// Token-conditional control; with `enforce` the thinking is budget forced at
/// the instructed bucket.
GenerationRecord run_token_conditional(std::string_view question, std::uint64_t bucket, bool enforce,
                                       const Backend& backend, const DecodeParams& decode,
                                       BudgetPolicy base = {}, std::string question_id = {});

/// Class-conditional control (no intervention).
GenerationRecord run_class_conditional(std::string_view question, ThinkingClass c,
                                       const Backend& backend, const DecodeParams& decode,
                                       BudgetPolicy base = {}, std::string question_id = {});

struct StepRunResult {
  GenerationRecord record;
  std::uint64_t steps_used = 0;     // countdown delimiters kept in the thinking
  bool violation = false;           // counter reached 0 or below in the kept text
  bool intervened = false;          // enforcement cut the thinking
  std::uint64_t delimiter_tokens = 0;
};

struct StepControlOptions {
  std::string end_of_thinking_delimiter{kAnswerDelimiter};
  std::string assistant_marker = "<|im_start|>assistant";
  std::optional<std::uint64_t> max_total_tokens;  // defaults to the context window
};

/// Step-conditional control. With `enforce`, thinking stops as soon as the
/// model emits a counter of 0 or below and the answer delimiter is appended.
/// thinking_tokens excludes the step delimiters.
StepRunResult run_step_conditional(std::string_view question, std::uint64_t step_budget, bool enforce,
                                   const Backend& backend, const DecodeParams& decode,
                                   const StepControlOptions& options = {}, std::string question_id = {});

}  // namespace ttc
