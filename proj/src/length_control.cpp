#include "ttc/length_control.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "ttc/answers.hpp"
#include "ttc/errors.hpp"

namespace ttc {

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const std::regex& step_delimiter_regex() {
  static const std::regex re(R"(<\|im_start\|>(-?\d+) steps left)");
  return re;
}

}  // namespace

std::string_view class_prompt_text(ThinkingClass c) {
  switch (c) {
    case ThinkingClass::short_thinking:
      return "Answer after a short amount of thinking. Do not spend excessive time double-checking "
             "your work.";
    case ThinkingClass::long_thinking:
      return "Answer after a long amount of thinking. If you feel like you are finished early, spend "
             "the extra time trying to double-check your work until you are absolutely sure that you "
             "have the correct answer.";
  }
  return "";
}

std::uint64_t next_power_of_two(std::uint64_t value) {
  std::uint64_t p = 1;
  while (p < value) p <<= 1;
  return p;
}

std::uint64_t token_bucket(std::uint64_t trace_tokens, std::uint64_t min_bucket) {
  return std::max(next_power_of_two(trace_tokens), next_power_of_two(min_bucket));
}

std::string build_token_prompt(std::string_view question, std::uint64_t bucket) {
  return std::string(question) + "\n\nThink for up to " + std::to_string(bucket) + " tokens.";
}

std::string build_step_prompt(std::string_view question, std::uint64_t step_budget) {
  return std::string(question) + "\n\nThink for up to " + std::to_string(step_budget) + " steps.";
}

std::string build_class_prompt(std::string_view question, ThinkingClass c) {
  return std::string(question) + "\n\n" + std::string(class_prompt_text(c));
}

std::vector<std::string> split_steps(std::string_view trace) {
  std::vector<std::string> steps;
  std::size_t pos = 0;
  while (pos <= trace.size()) {
    std::size_t end = trace.find("\n\n", pos);
    if (end == std::string_view::npos) end = trace.size();
    std::string_view block = trim(trace.substr(pos, end - pos));
    if (!block.empty()) steps.emplace_back(block);
    if (end == trace.size()) break;
    pos = end + 2;
  }
  return steps;
}

std::uint64_t step_bucket(std::size_t step_count) {
  return next_power_of_two(std::max<std::size_t>(step_count, 1));
}

std::string step_delimiter(std::int64_t steps_left) {
  return "<|im_start|>" + std::to_string(steps_left) + " steps left";
}

std::string build_step_trace(std::string_view trace, std::uint64_t step_budget) {
  const auto steps = split_steps(trace);
  if (steps.empty()) throw ValidationError("build_step_trace: empty trace");
  if (step_budget < steps.size()) {
    throw ValidationError("build_step_trace: " + std::to_string(steps.size()) +
                          " steps exceed the budget of " + std::to_string(step_budget));
  }
  std::string out;
  auto k = static_cast<std::int64_t>(step_budget);
  for (const auto& step : steps) {
    if (!out.empty()) out += '\n';
    out += step_delimiter(k--);
    out += '\n';
    out += step;
  }
  return out;
}

std::vector<std::pair<std::int64_t, std::string>> parse_step_trace(std::string_view rendered) {
  std::vector<std::pair<std::int64_t, std::string>> out;
  const std::string text(rendered);
  std::vector<std::smatch> matches;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), step_delimiter_regex());
       it != std::sregex_iterator(); ++it) {
    matches.push_back(*it);
  }
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const std::size_t body_start = static_cast<std::size_t>(matches[i].position(0) + matches[i].length(0));
    const std::size_t body_end =
        i + 1 < matches.size() ? static_cast<std::size_t>(matches[i + 1].position(0)) : text.size();
    std::string_view body = std::string_view(text).substr(body_start, body_end - body_start);
    if (!body.empty() && body.front() == '\n') body.remove_prefix(1);
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    out.emplace_back(std::stoll(matches[i][1].str()), std::string(body));
  }
  return out;
}

std::uint64_t control_cap_for(ControlMethod method, std::uint64_t instructed_value) {
  switch (method) {
    case ControlMethod::token: return instructed_value;
    case ControlMethod::step: return kTokensPerStepProxy * instructed_value;
  }
  return instructed_value;
}

// ----------------------------------------------------------------------------

GenerationRecord run_token_conditional(std::string_view question, std::uint64_t bucket, bool enforce,
                                       const Backend& backend, const DecodeParams& decode,
                                       BudgetPolicy base, std::string question_id) {
  base.forced_continuations = 0;
  base.max_thinking_tokens.reset();
  if (enforce) {
    base.max_thinking_tokens = bucket;
    if (base.max_total_tokens && *base.max_total_tokens < bucket) base.max_total_tokens.reset();
  }
  if (question_id.empty()) question_id = content_hash_id(question);
  return run_budget_forced(build_token_prompt(question, bucket), base, backend, decode,
                           std::move(question_id));
}

GenerationRecord run_class_conditional(std::string_view question, ThinkingClass c,
                                       const Backend& backend, const DecodeParams& decode,
                                       BudgetPolicy base, std::string question_id) {
  base.forced_continuations = 0;
  base.max_thinking_tokens.reset();
  if (question_id.empty()) question_id = content_hash_id(question);
  return run_budget_forced(build_class_prompt(question, c), base, backend, decode,
                           std::move(question_id));
}

StepRunResult run_step_conditional(std::string_view question, std::uint64_t step_budget, bool enforce,
                                   const Backend& backend, const DecodeParams& decode,
                                   const StepControlOptions& options, std::string question_id) {
  if (question.empty()) throw ValidationError("question must be nonempty");
  if (step_budget == 0) throw ValidationError("step budget must be positive");

  const TokenizerHandle& tok = decode.tokenizer;
  const std::uint64_t window = backend.context_window();
  const std::uint64_t max_total = options.max_total_tokens.value_or(window);

  StepRunResult result;
  GenerationRecord& rec = result.record;
  rec.question_id = question_id.empty() ? content_hash_id(question) : std::move(question_id);
  rec.prompt = build_step_prompt(question, step_budget);
  rec.seed = decode.seed;
  rec.temperature = decode.temperature;

  std::string transcript = rec.prompt + "\n" + options.assistant_marker + "\n";
  std::string thinking;
  std::uint64_t used = 0;
  std::optional<std::uint64_t> cursor;
  bool skip_answer = false;

  std::vector<std::string> stops{options.end_of_thinking_delimiter};
  if (enforce) {
    stops.push_back(step_delimiter(0));
    stops.push_back("<|im_start|>-");
  }

  while (true) {
    const std::uint64_t room = window > whitespace_token_count(transcript)
                                   ? window - whitespace_token_count(transcript)
                                   : 0;
    const std::uint64_t per_call = std::min(max_total > used ? max_total - used : 0, room);
    if (per_call == 0) {
      rec.loop_guard_hit = true;
      rec.stop_reason = StopReason::context_limit;
      skip_answer = true;
      break;
    }
    GenRequest req;
    req.context = transcript;
    req.stop_sequences = stops;
    req.max_new_tokens = per_call;
    req.temperature = decode.temperature;
    req.seed = decode.seed;
    req.resume_cursor = cursor;
    GenChunk chunk;
    try {
      chunk = backend.generate(req);
    } catch (const ContextLimitError&) {
      rec.stop_reason = StopReason::context_limit;
      skip_answer = true;
      break;
    }
    cursor = chunk.resume_cursor;
    used += count_tokens(chunk.text, tok, chunk.tokens_used);
    thinking += chunk.text;
    transcript += chunk.text;

    if (chunk.stop_cause == StopCause::stop_sequence_hit) {
      if (chunk.stop_index && *chunk.stop_index > 0) result.intervened = true;
      break;
    }
    if (chunk.stop_cause == StopCause::end_of_stream) break;
    // length limit: max_total or the window is exhausted
    rec.loop_guard_hit = true;
    rec.stop_reason = StopReason::context_limit;
    skip_answer = true;
    break;
  }

  while (!thinking.empty() && std::isspace(static_cast<unsigned char>(thinking.back()))) {
    thinking.pop_back();
  }
  rec.thinking_text = thinking;

  const std::string text(thinking);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), step_delimiter_regex());
       it != std::sregex_iterator(); ++it) {
    ++result.steps_used;
    if (std::stoll((*it)[1].str()) <= 0) result.violation = true;
    result.delimiter_tokens += count_tokens(it->str(0), tok);
  }
  const std::uint64_t raw = count_tokens(thinking, tok, tok.mode == TokenizerMode::backend_reported
                                                             ? std::optional<std::uint64_t>(used)
                                                             : std::nullopt);
  rec.thinking_tokens = raw > result.delimiter_tokens ? raw - result.delimiter_tokens : 0;

  if (skip_answer) {
    rec.transcript = transcript;
    rec.extracted_answer = extract_answer(thinking).value_or("");
    return result;
  }
  complete_answer(rec, std::move(transcript), options.end_of_thinking_delimiter, std::nullopt,
                  max_total > used ? max_total - used : 0, cursor, backend, decode);
  return result;
}

}  // namespace ttc
