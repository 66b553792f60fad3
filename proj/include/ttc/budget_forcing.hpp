#pragma once

/**
 * Budget forcing: the think-then-answer controller.
 *
 * Thinking is requested with the end-of-thinking delimiter as the only stop
 * sequence and with max_new_tokens set to the remaining thinking budget.
 *
 * - Delimiter hit with continuations left: the delimiter is dropped, " Wait"
 *   (the continuation string) is appended and thinking resumes.
 * - Delimiter hit otherwise: the controller appends the delimiter itself and
 *   moves to answering.
 * - Budget exhausted: the delimiter plus the optional answer prefix are
 *   appended and the model must answer with what it has (forced exit).
 *
 * Transcript layout:
 *   prompt "\n" think-delim "\n" thinking "\n" end-delim "\n" [prefix] answer
 */

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/core_types.hpp"
#include "ttc/lm_backend.hpp"
#include "ttc/metrics.hpp"

namespace ttc {

struct DecodeParams {
  double temperature = 0.0;
  std::int64_t seed = 0;
  TokenizerHandle tokenizer{};
};

enum class Phase { thinking, answering, done };

struct ControllerState {
  Phase phase = Phase::thinking;
  std::uint64_t thinking_tokens_so_far = 0;
  std::uint64_t continuations_used = 0;
  std::string transcript;
};

/// Runs one question through the controller. `question_id` defaults to the
/// content hash of the question. Backend errors that survive the backend's
/// own retries propagate; a context overflow yields a context_limit record.
GenerationRecord run_budget_forced(std::string_view question, const BudgetPolicy& policy,
                                   const Backend& backend, const DecodeParams& decode,
                                   std::string question_id = {});

/// Appends the end-of-thinking delimiter (and `answer_prefix` when given) to
/// `transcript`, requests the answer with at most `tokens_left` new tokens and
/// fills the answer fields, transcript and extracted answer of `rec`.
/// `rec.thinking_text` must already be set; it is the extraction fallback.
void complete_answer(GenerationRecord& rec, std::string transcript, std::string_view end_delimiter,
                     std::optional<std::string_view> answer_prefix, std::uint64_t tokens_left,
                     std::optional<std::uint64_t> cursor, const Backend& backend,
                     const DecodeParams& decode);

/// `\n` + delimiter + `\n`, the rendering used around both delimiters.
std::string render_delimiter(std::string_view delimiter);

/// Removes a trailing proper prefix of `delimiter` from `text` (a stop
/// sequence cut by the token limit). Returns the number of bytes removed.
std::size_t strip_partial_delimiter(std::string& text, std::string_view delimiter);

struct ExtrapolationPoint {
  std::uint64_t forced_continuations = 0;
  EvalPoint point;
  std::vector<GenerationRecord> records;
};

/// One evaluation per N (forced continuations) with identical decode params.
/// Per-question backend failures count as incorrect, they do not abort.
std::vector<ExtrapolationPoint> extrapolation_sweep(std::span<const BenchmarkQuestion> questions,
                                                    std::span<const std::uint64_t> n_values,
                                                    const BudgetPolicy& base, const Backend& backend,
                                                    const DecodeParams& decode);

}  // namespace ttc
