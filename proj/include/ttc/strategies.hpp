#pragma once

// Rejection sampling against a thinking budget, and answer aggregation over
// parallel samples (majority vote, weighted vote).

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ttc/budget_forcing.hpp"
#include "ttc/core_types.hpp"
#include "ttc/errors.hpp"
#include "ttc/lm_backend.hpp"

namespace ttc {

struct RejectionConfig {
  std::uint64_t token_budget = 1;
  double temperature = 1.0;
  std::uint64_t max_tries = 1000;
  std::int64_t seed = 0;

  void validate() const;
};

/// Raised when no attempt fits the budget; carries the shortest rejected run.
class RejectionExhaustedError : public Error {
 public:
  RejectionExhaustedError(const std::string& what, GenerationRecord shortest)
      : Error(what), shortest_(std::move(shortest)) {}
  const GenerationRecord& shortest() const { return shortest_; }

 private:
  GenerationRecord shortest_;
};

struct RejectionResult {
  GenerationRecord record;  // record.tries == tries
  std::uint64_t tries = 0;
};

/// Samples full (unforced) generations with seed + attempt index until one has
/// thinking_tokens < token_budget. `base` supplies delimiters and limits; its
/// cap and continuations are ignored.
RejectionResult rejection_sample(std::string_view question, const RejectionConfig& config,
                                 const Backend& backend, BudgetPolicy base = {},
                                 TokenizerHandle tokenizer = {}, std::string question_id = {});

using AnswerNormalizer = std::function<std::string(std::string_view)>;

/// The default normalizer (trim, trailing periods, single \boxed{}, integer
/// canonicalization).
std::string default_normalizer(std::string_view answer);

struct VoteTally {
  std::map<std::string, double> counts;  // normalized answer -> count / summed weight
  std::string winner;
  bool tie_broken = false;
};

/// Modal normalized answer; ties go to the answer generated first.
VoteTally majority_vote(std::span<const std::string> answers,
                        const AnswerNormalizer& normalizer = default_normalizer);

/// Winner maximizes the summed weight; all-zero weights fall back to counts.
VoteTally weighted_vote(std::span<const std::pair<std::string, double>> answers,
                        const AnswerNormalizer& normalizer = default_normalizer);

void to_json(json& j, const VoteTally& t);

}  // namespace ttc
