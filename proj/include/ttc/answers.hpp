#pragma once

// Answer extraction, normalization and matching shared by the controllers,
// the voting strategies and the evaluation harness.

#include <optional>
#include <string>
#include <string_view>

#include "ttc/core_types.hpp"

namespace ttc {

/// Contents of the last balanced `\boxed{...}` in `text`, if any.
std::optional<std::string> last_boxed(std::string_view text);

/// Extraction order: last boxed expression; else the text after the last
/// "Final Answer:"; else the last standalone number. nullopt when none apply.
std::optional<std::string> extract_answer(std::string_view text);

/// Canonical form used for voting and matching: trims whitespace, strips
/// trailing periods and `$` wrappers, unwraps a single `\boxed{}`, and drops
/// leading zeros of integer strings ("059" -> "59").
std::string normalize_answer(std::string_view answer);

/// Parses a (normalized) integer string, nullopt for anything else.
std::optional<long long> parse_integer(std::string_view s);

/// False when `extracted` is empty or (for integer answers) not an integer;
/// such answers never match.
bool answer_extractable(std::string_view extracted, AnswerKind kind);

bool match_answer(std::string_view extracted, std::string_view gold, AnswerKind kind);

}  // namespace ttc
