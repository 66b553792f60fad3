#include "ttc/core_types.hpp"

#include <cctype>
#include <cstdio>
#include <map>
#include <mutex>

#include "ttc/errors.hpp"

namespace ttc {

namespace {

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    out = it->get<T>();
  }
}

std::mutex& vocab_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, TokenCounter>& vocab_registry() {
  static std::map<std::string, TokenCounter> registry;
  return registry;
}

}  // namespace

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::natural: return "natural";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::continuation_suppressed: return "continuation_suppressed";
    case StopReason::context_limit: return "context_limit";
    case StopReason::backend_error: return "backend_error";
  }
  return "natural";
}

StopReason stop_reason_from_string(std::string_view s) {
  if (s == "natural") return StopReason::natural;
  if (s == "budget_exhausted") return StopReason::budget_exhausted;
  if (s == "continuation_suppressed") return StopReason::continuation_suppressed;
  if (s == "context_limit") return StopReason::context_limit;
  if (s == "backend_error") return StopReason::backend_error;
  throw ParseError("unknown stop_reason: " + std::string(s));
}

std::string_view to_string(TokenizerMode m) {
  switch (m) {
    case TokenizerMode::backend_reported: return "backend_reported";
    case TokenizerMode::whitespace_approx: return "whitespace_approx";
    case TokenizerMode::external_vocab: return "external_vocab";
  }
  return "backend_reported";
}

TokenizerMode tokenizer_mode_from_string(std::string_view s) {
  if (s == "backend_reported") return TokenizerMode::backend_reported;
  if (s == "whitespace_approx") return TokenizerMode::whitespace_approx;
  if (s == "external_vocab") return TokenizerMode::external_vocab;
  throw ConfigError("unknown tokenizer mode: " + std::string(s));
}

std::string_view to_string(AnswerKind k) {
  switch (k) {
    case AnswerKind::integer_000_999: return "integer_000_999";
    case AnswerKind::exact_string: return "exact_string";
    case AnswerKind::boxed_math: return "boxed_math";
  }
  return "exact_string";
}

AnswerKind answer_kind_from_string(std::string_view s) {
  if (s == "integer_000_999") return AnswerKind::integer_000_999;
  if (s == "exact_string") return AnswerKind::exact_string;
  if (s == "boxed_math") return AnswerKind::boxed_math;
  throw ParseError("unknown answer_kind: " + std::string(s));
}

// ----------------------------------------------------------------------------

void BudgetPolicy::validate() const {
  if (max_thinking_tokens && *max_thinking_tokens == 0) {
    throw ConfigError("max_thinking_tokens must be positive");
  }
  if (max_total_tokens && *max_total_tokens == 0) {
    throw ConfigError("max_total_tokens must be positive");
  }
  if (max_thinking_tokens && max_total_tokens && *max_thinking_tokens > *max_total_tokens) {
    throw ConfigError("max_thinking_tokens exceeds max_total_tokens");
  }
  if (forced_continuations > 0 && continuation_string.empty()) {
    throw ConfigError("continuation_string must be nonempty when forced_continuations > 0");
  }
  if (end_of_thinking_delimiter.empty()) {
    throw ConfigError("end_of_thinking_delimiter must be nonempty");
  }
  if (think_delimiter.empty()) {
    throw ConfigError("think_delimiter must be nonempty");
  }
}

std::uint64_t BudgetPolicy::resolved_max_total(std::uint64_t context_window) const {
  if (max_total_tokens) return *max_total_tokens;
  if (max_thinking_tokens) return 4 * *max_thinking_tokens;
  return context_window;
}

// ----------------------------------------------------------------------------

void register_vocab(const std::string& vocab_id, TokenCounter counter) {
  std::lock_guard lock(vocab_mutex());
  vocab_registry()[vocab_id] = std::move(counter);
}

std::uint64_t whitespace_token_count(std::string_view text) {
  std::uint64_t n = 0;
  bool in_run = false;
  for (unsigned char c : text) {
    const bool ws = std::isspace(c) != 0;
    if (!ws && !in_run) ++n;
    in_run = !ws;
  }
  return n;
}

std::uint64_t count_tokens(std::string_view text, const TokenizerHandle& tokenizer,
                           std::optional<std::uint64_t> reported) {
  switch (tokenizer.mode) {
    case TokenizerMode::backend_reported:
      return reported ? *reported : whitespace_token_count(text);
    case TokenizerMode::whitespace_approx:
      return whitespace_token_count(text);
    case TokenizerMode::external_vocab: {
      if (!tokenizer.vocab_id) throw ConfigError("external_vocab tokenizer without vocab_id");
      TokenCounter counter;
      {
        std::lock_guard lock(vocab_mutex());
        auto it = vocab_registry().find(*tokenizer.vocab_id);
        if (it == vocab_registry().end()) {
          throw ConfigError("unknown vocab_id: " + *tokenizer.vocab_id);
        }
        counter = it->second;
      }
      return counter(text);
    }
  }
  return whitespace_token_count(text);
}

std::string content_hash_id(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "h%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ----------------------------------------------------------------------------
// JSON

void to_json(json& j, const ReasoningSample& s) {
  j = json{{"id", s.id},
           {"question", s.question},
           {"reference_solution", s.reference_solution},
           {"reasoning_trace", s.reasoning_trace},
           {"generated_solution", s.generated_solution},
           {"source_dataset", s.source_dataset},
           {"domain", s.domain},
           {"thinking_token_count", s.thinking_token_count},
           {"gemini_correct", s.gemini_correct ? json(*s.gemini_correct) : json(nullptr)}};
}

void from_json(const json& j, ReasoningSample& s) {
  s = ReasoningSample{};
  j.at("question").get_to(s.question);
  read_optional(j, "id", s.id);
  if (s.id.empty()) s.id = content_hash_id(s.question);
  read_optional(j, "reference_solution", s.reference_solution);
  read_optional(j, "reasoning_trace", s.reasoning_trace);
  read_optional(j, "generated_solution", s.generated_solution);
  read_optional(j, "source_dataset", s.source_dataset);
  read_optional(j, "domain", s.domain);
  read_optional(j, "thinking_token_count", s.thinking_token_count);
  if (auto it = j.find("gemini_correct"); it != j.end() && !it->is_null()) {
    s.gemini_correct = it->get<bool>();
  }
}

void to_json(json& j, const GenerationRecord& r) {
  j = json{{"question_id", r.question_id},
           {"prompt", r.prompt},
           {"thinking_text", r.thinking_text},
           {"thinking_tokens", r.thinking_tokens},
           {"answer_text", r.answer_text},
           {"answer_tokens", r.answer_tokens},
           {"answer_tokens_with_prefix", r.answer_tokens_with_prefix},
           {"extracted_answer", r.extracted_answer},
           {"wait_insertions", r.wait_insertions},
           {"forced_exit", r.forced_exit},
           {"answer_prefix_applied", r.answer_prefix_applied},
           {"loop_guard_hit", r.loop_guard_hit},
           {"stop_reason", std::string(to_string(r.stop_reason))},
           {"tries", r.tries},
           {"seed", r.seed},
           {"temperature", r.temperature},
           {"transcript", r.transcript}};
}

void from_json(const json& j, GenerationRecord& r) {
  r = GenerationRecord{};
  j.at("question_id").get_to(r.question_id);
  read_optional(j, "prompt", r.prompt);
  read_optional(j, "thinking_text", r.thinking_text);
  j.at("thinking_tokens").get_to(r.thinking_tokens);
  read_optional(j, "answer_text", r.answer_text);
  read_optional(j, "answer_tokens", r.answer_tokens);
  read_optional(j, "answer_tokens_with_prefix", r.answer_tokens_with_prefix);
  read_optional(j, "extracted_answer", r.extracted_answer);
  read_optional(j, "wait_insertions", r.wait_insertions);
  read_optional(j, "forced_exit", r.forced_exit);
  read_optional(j, "answer_prefix_applied", r.answer_prefix_applied);
  read_optional(j, "loop_guard_hit", r.loop_guard_hit);
  if (auto it = j.find("stop_reason"); it != j.end()) {
    r.stop_reason = stop_reason_from_string(it->get<std::string>());
  }
  read_optional(j, "tries", r.tries);
  read_optional(j, "seed", r.seed);
  read_optional(j, "temperature", r.temperature);
  read_optional(j, "transcript", r.transcript);
  if (r.tries == 0) throw ParseError("record " + r.question_id + ": tries must be >= 1");
  if (r.forced_exit != (r.stop_reason == StopReason::budget_exhausted)) {
    throw ParseError("record " + r.question_id + ": forced_exit inconsistent with stop_reason");
  }
}

void to_json(json& j, const BudgetPolicy& p) {
  j = json{{"max_thinking_tokens", p.max_thinking_tokens ? json(*p.max_thinking_tokens) : json(nullptr)},
           {"forced_continuations", p.forced_continuations},
           {"continuation_string", p.continuation_string},
           {"think_delimiter", p.think_delimiter},
           {"end_of_thinking_delimiter", p.end_of_thinking_delimiter},
           {"answer_prefix", p.answer_prefix ? json(*p.answer_prefix) : json(nullptr)},
           {"max_total_tokens", p.max_total_tokens ? json(*p.max_total_tokens) : json(nullptr)}};
}

void from_json(const json& j, BudgetPolicy& p) {
  p = BudgetPolicy{};
  for (const auto& [key, _] : j.items()) {
    if (key != "max_thinking_tokens" && key != "forced_continuations" &&
        key != "continuation_string" && key != "think_delimiter" &&
        key != "end_of_thinking_delimiter" && key != "answer_prefix" &&
        key != "max_total_tokens") {
      throw ConfigError("unknown policy key: " + key);
    }
  }
  if (auto it = j.find("max_thinking_tokens"); it != j.end() && !it->is_null()) {
    p.max_thinking_tokens = it->get<std::uint64_t>();
  }
  read_optional(j, "forced_continuations", p.forced_continuations);
  read_optional(j, "continuation_string", p.continuation_string);
  read_optional(j, "think_delimiter", p.think_delimiter);
  read_optional(j, "end_of_thinking_delimiter", p.end_of_thinking_delimiter);
  if (auto it = j.find("answer_prefix"); it != j.end()) {
    if (it->is_null()) {
      p.answer_prefix.reset();
    } else {
      p.answer_prefix = it->get<std::string>();
    }
  }
  if (auto it = j.find("max_total_tokens"); it != j.end() && !it->is_null()) {
    p.max_total_tokens = it->get<std::uint64_t>();
  }
}

void to_json(json& j, const BenchmarkQuestion& q) {
  j = json{{"id", q.id}, {"prompt", q.prompt}, {"gold", q.gold},
           {"answer_kind", std::string(to_string(q.kind))}};
}

void from_json(const json& j, BenchmarkQuestion& q) {
  q = BenchmarkQuestion{};
  j.at("prompt").get_to(q.prompt);
  j.at("gold").get_to(q.gold);
  read_optional(j, "id", q.id);
  if (q.id.empty()) q.id = content_hash_id(q.prompt);
  if (auto it = j.find("answer_kind"); it != j.end()) {
    q.kind = answer_kind_from_string(it->get<std::string>());
  }
  if (q.kind == AnswerKind::integer_000_999) {
    const bool digits = !q.gold.empty() && q.gold.size() <= 3 &&
                        q.gold.find_first_not_of("0123456789") == std::string::npos;
    if (!digits) throw ParseError("question " + q.id + ": gold is not an integer in 000..999");
  }
}

}  // namespace ttc
