#include "ttc/strategies.hpp"

#include <cmath>
#include <unordered_map>

#include "ttc/answers.hpp"

namespace ttc {

void RejectionConfig::validate() const {
  if (token_budget == 0) throw ConfigError("rejection token_budget must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("rejection temperature must be positive");
  }
  if (max_tries == 0) throw ConfigError("rejection max_tries must be >= 1");
}

RejectionResult rejection_sample(std::string_view question, const RejectionConfig& config,
                                 const Backend& backend, BudgetPolicy base,
                                 TokenizerHandle tokenizer, std::string question_id) {
  config.validate();
  base.max_thinking_tokens.reset();
  base.forced_continuations = 0;
  base.answer_prefix.reset();
  if (question_id.empty()) question_id = content_hash_id(question);

  std::optional<GenerationRecord> shortest;
  for (std::uint64_t attempt = 0; attempt < config.max_tries; ++attempt) {
    DecodeParams decode{config.temperature, config.seed + static_cast<std::int64_t>(attempt), tokenizer};
    GenerationRecord rec = run_budget_forced(question, base, backend, decode, question_id);
    rec.tries = attempt + 1;
    if (rec.thinking_tokens < config.token_budget) {
      return RejectionResult{std::move(rec), attempt + 1};
    }
    if (!shortest || rec.thinking_tokens < shortest->thinking_tokens) shortest = std::move(rec);
  }
  shortest->tries = config.max_tries;
  throw RejectionExhaustedError("no sample under " + std::to_string(config.token_budget) +
                                    " thinking tokens in " + std::to_string(config.max_tries) +
                                    " tries",
                                std::move(*shortest));
}

std::string default_normalizer(std::string_view answer) { return normalize_answer(answer); }

namespace {

// Shared tally: per normalized answer its score and first position.
VoteTally tally(std::span<const std::pair<std::string, double>> ballots) {
  VoteTally out;
  std::unordered_map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < ballots.size(); ++i) {
    out.counts[ballots[i].first] += ballots[i].second;
    first_seen.emplace(ballots[i].first, i);
  }
  double best = -1.0;
  std::size_t best_pos = 0;
  std::size_t ties = 0;
  for (const auto& [answer, score] : out.counts) {
    const std::size_t pos = first_seen.at(answer);
    if (score > best) {
      best = score;
      best_pos = pos;
      out.winner = answer;
      ties = 1;
    } else if (score == best) {
      ++ties;
      if (pos < best_pos) {
        best_pos = pos;
        out.winner = answer;
      }
    }
  }
  out.tie_broken = ties > 1;
  return out;
}

}  // namespace

VoteTally majority_vote(std::span<const std::string> answers, const AnswerNormalizer& normalizer) {
  if (answers.empty()) throw ValidationError("majority_vote needs at least one ballot");
  std::vector<std::pair<std::string, double>> ballots;
  ballots.reserve(answers.size());
  for (const auto& a : answers) ballots.emplace_back(normalizer(a), 1.0);
  return tally(ballots);
}

VoteTally weighted_vote(std::span<const std::pair<std::string, double>> answers,
                        const AnswerNormalizer& normalizer) {
  if (answers.empty()) throw ValidationError("weighted_vote needs at least one ballot");
  bool any_positive = false;
  for (const auto& [text, w] : answers) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("vote weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  std::vector<std::pair<std::string, double>> ballots;
  ballots.reserve(answers.size());
  for (const auto& [text, w] : answers) ballots.emplace_back(normalizer(text), any_positive ? w : 1.0);
  return tally(ballots);
}

void to_json(json& j, const VoteTally& t) {
  j = json{{"counts", t.counts}, {"winner", t.winner}, {"tie_broken", t.tie_broken}};
}

}  // namespace ttc
