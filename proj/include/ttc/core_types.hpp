#pragma once

// Shared domain types for the toolkit: curated samples, controlled-decode
// records, budget policies, benchmark questions and token counting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace ttc {

using json = nlohmann::json;

// ============================================================================
// Curated sample
// ============================================================================

/// One row of a curation pool: question, reasoning trace and solution.
struct ReasoningSample {
  std::string id;
  std::string question;
  std::string reference_solution;
  std::string reasoning_trace;  // empty before generation
  std::string generated_solution;
  std::string source_dataset;
  std::string domain;
  std::uint64_t thinking_token_count = 0;
  std::optional<bool> gemini_correct;  // grader verdict on the generated solution

  bool operator==(const ReasoningSample&) const = default;
};

// ============================================================================
// Controlled decode record
// ============================================================================

enum class StopReason {
  natural,
  budget_exhausted,
  continuation_suppressed,
  context_limit,
  backend_error,
};

std::string_view to_string(StopReason r);
StopReason stop_reason_from_string(std::string_view s);

/// Result of one controlled generation.
///
/// `answer_tokens` counts generated answer tokens only; the prefix-inclusive
/// count is kept alongside since it is ambiguous which one a report wants.
/// `transcript` is the exact text the backend saw plus the final answer.
struct GenerationRecord {
  std::string question_id;
  std::string prompt;
  std::string thinking_text;
  std::uint64_t thinking_tokens = 0;
  std::string answer_text;
  std::uint64_t answer_tokens = 0;
  std::uint64_t answer_tokens_with_prefix = 0;
  std::string extracted_answer;
  std::uint64_t wait_insertions = 0;
  bool forced_exit = false;
  bool answer_prefix_applied = false;
  bool loop_guard_hit = false;
  StopReason stop_reason = StopReason::natural;
  std::uint64_t tries = 1;
  std::int64_t seed = 0;
  double temperature = 0.0;
  std::string transcript;

  bool operator==(const GenerationRecord&) const = default;
};

// ============================================================================
// Budget policy
// ============================================================================

inline constexpr std::string_view kThinkDelimiter = "<|im_start|>think";
inline constexpr std::string_view kAnswerDelimiter = "<|im_start|>answer";
inline constexpr std::string_view kDefaultAnswerPrefix = "Final Answer:";
inline constexpr std::string_view kDefaultContinuation = "Wait";

/// Budget-forcing configuration.
///
/// max_total_tokens is the repetition-loop guard; when unset it resolves to
/// 4x the thinking cap, or the backend context window when uncapped.
struct BudgetPolicy {
  std::optional<std::uint64_t> max_thinking_tokens;
  std::uint64_t forced_continuations = 0;
  std::string continuation_string{kDefaultContinuation};
  std::string think_delimiter{kThinkDelimiter};
  std::string end_of_thinking_delimiter{kAnswerDelimiter};
  std::optional<std::string> answer_prefix{std::string(kDefaultAnswerPrefix)};
  std::optional<std::uint64_t> max_total_tokens;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
  std::uint64_t resolved_max_total(std::uint64_t context_window) const;

  bool operator==(const BudgetPolicy&) const = default;
};

// ============================================================================
// Tokenizer
// ============================================================================

enum class TokenizerMode { backend_reported, whitespace_approx, external_vocab };

std::string_view to_string(TokenizerMode m);
TokenizerMode tokenizer_mode_from_string(std::string_view s);

struct TokenizerHandle {
  TokenizerMode mode = TokenizerMode::backend_reported;
  std::optional<std::string> vocab_id;

  bool operator==(const TokenizerHandle&) const = default;
};

using TokenCounter = std::function<std::uint64_t(std::string_view)>;

/// Registers a counter under `vocab_id` for TokenizerMode::external_vocab.
void register_vocab(const std::string& vocab_id, TokenCounter counter);

/// Number of maximal non-whitespace runs.
std::uint64_t whitespace_token_count(std::string_view text);

/// Counts tokens of `text`. backend_reported returns `reported` when given
/// and falls back to whitespace runs otherwise. external_vocab with an
/// unregistered vocab id throws ConfigError.
std::uint64_t count_tokens(std::string_view text, const TokenizerHandle& tokenizer,
                           std::optional<std::uint64_t> reported = std::nullopt);

// ============================================================================
// Benchmark questions
// ============================================================================

enum class AnswerKind { integer_000_999, exact_string, boxed_math };

std::string_view to_string(AnswerKind k);
AnswerKind answer_kind_from_string(std::string_view s);

struct BenchmarkQuestion {
  std::string id;
  std::string prompt;
  std::string gold;
  AnswerKind kind = AnswerKind::exact_string;

  bool operator==(const BenchmarkQuestion&) const = default;
};

/// Stable id for rows that arrive without one: "h" + 16 hex digits of FNV-1a.
std::string content_hash_id(std::string_view text);

// ============================================================================
// JSON mapping (one object per JSONL line)
// ============================================================================

void to_json(json& j, const ReasoningSample& s);
void from_json(const json& j, ReasoningSample& s);
void to_json(json& j, const GenerationRecord& r);
void from_json(const json& j, GenerationRecord& r);
void to_json(json& j, const BudgetPolicy& p);
void from_json(const json& j, BudgetPolicy& p);
void to_json(json& j, const BenchmarkQuestion& q);
void from_json(const json& j, BenchmarkQuestion& q);

}  // namespace ttc
