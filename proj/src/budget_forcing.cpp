#include "ttc/budget_forcing.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "ttc/answers.hpp"
#include "ttc/errors.hpp"

namespace ttc {

namespace {

void rstrip(std::string& s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
}

std::uint64_t saturating_sub(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : 0; }

}  // namespace

std::string render_delimiter(std::string_view delimiter) {
  std::string out = "\n";
  out += delimiter;
  out += '\n';
  return out;
}

std::size_t strip_partial_delimiter(std::string& text, std::string_view delimiter) {
  for (std::size_t k = std::min(delimiter.size() - 1, text.size()); k > 0; --k) {
    if (std::string_view(text).substr(text.size() - k) == delimiter.substr(0, k)) {
      text.resize(text.size() - k);
      return k;
    }
  }
  return 0;
}

GenerationRecord run_budget_forced(std::string_view question, const BudgetPolicy& policy,
                                   const Backend& backend, const DecodeParams& decode,
                                   std::string question_id) {
  policy.validate();
  if (question.empty()) throw ValidationError("question must be nonempty");

  const std::uint64_t window = backend.context_window();
  const std::uint64_t max_total = policy.resolved_max_total(window);
  const std::optional<std::uint64_t> cap = policy.max_thinking_tokens;
  const TokenizerHandle& tok = decode.tokenizer;
  const std::uint64_t continuation_tokens = count_tokens(policy.continuation_string, tok);

  GenerationRecord rec;
  rec.question_id = question_id.empty() ? content_hash_id(question) : std::move(question_id);
  rec.prompt = std::string(question);
  rec.seed = decode.seed;
  rec.temperature = decode.temperature;

  ControllerState st;
  st.transcript = rec.prompt + render_delimiter(policy.think_delimiter);
  std::string thinking;
  std::uint64_t total_used = 0;
  std::optional<std::uint64_t> cursor;
  bool skip_answer = false;

  auto window_room = [&](const std::string& context) {
    return saturating_sub(window, whitespace_token_count(context));
  };

  while (st.phase == Phase::thinking) {
    std::uint64_t per_call = saturating_sub(max_total, total_used);
    if (cap) per_call = std::min(per_call, *cap - st.thinking_tokens_so_far);
    const std::uint64_t room = window_room(st.transcript);
    const bool window_bound = room < per_call;
    per_call = std::min(per_call, room);
    if (per_call == 0) {
      if (cap && st.thinking_tokens_so_far >= *cap) {
        rec.stop_reason = StopReason::budget_exhausted;
      } else if (room == 0) {
        rec.stop_reason = StopReason::context_limit;
        skip_answer = true;
      } else {
        rec.loop_guard_hit = true;
        rec.stop_reason =
            st.continuations_used > 0 ? StopReason::continuation_suppressed : StopReason::context_limit;
        skip_answer = true;
      }
      st.phase = Phase::answering;
      break;
    }

    GenRequest req;
    req.context = st.transcript;
    req.stop_sequences = {policy.end_of_thinking_delimiter};
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
      st.phase = Phase::answering;
      break;
    }
    cursor = chunk.resume_cursor;

    std::string text = std::move(chunk.text);
    std::uint64_t n = count_tokens(text, tok, chunk.tokens_used);
    if (chunk.stop_cause == StopCause::length_limit) {
      // a cut delimiter that started its own token no longer counts
      if (strip_partial_delimiter(text, policy.end_of_thinking_delimiter) > 0 &&
          (text.empty() || std::isspace(static_cast<unsigned char>(text.back())))) {
        n = saturating_sub(n, 1);
      }
    }
    thinking += text;
    st.transcript += text;
    st.thinking_tokens_so_far += n;
    total_used += n;

    switch (chunk.stop_cause) {
      case StopCause::stop_sequence_hit: {
        if (st.continuations_used < policy.forced_continuations) {
          const std::uint64_t budget_left =
              cap ? *cap - std::min(*cap, st.thinking_tokens_so_far)
                  : std::numeric_limits<std::uint64_t>::max();
          const std::uint64_t total_left = saturating_sub(max_total, total_used);
          if (continuation_tokens <= budget_left && continuation_tokens <= total_left) {
            rstrip(thinking);
            rstrip(st.transcript);
            thinking += " " + policy.continuation_string;
            st.transcript += " " + policy.continuation_string;
            st.thinking_tokens_so_far += continuation_tokens;
            total_used += continuation_tokens;
            ++st.continuations_used;
            break;
          }
          if (continuation_tokens > budget_left) {
            rec.stop_reason = StopReason::budget_exhausted;
          } else {
            rec.loop_guard_hit = true;
            rec.stop_reason = StopReason::continuation_suppressed;
          }
        } else {
          rec.stop_reason = StopReason::natural;
        }
        st.phase = Phase::answering;
        break;
      }
      case StopCause::length_limit:
        if (cap && st.thinking_tokens_so_far >= *cap) {
          rec.stop_reason = StopReason::budget_exhausted;
        } else if (window_bound) {
          rec.stop_reason = StopReason::context_limit;
          skip_answer = true;
        } else {
          rec.loop_guard_hit = true;
          rec.stop_reason = st.continuations_used > 0 ? StopReason::continuation_suppressed
                                                      : StopReason::context_limit;
          skip_answer = true;
        }
        st.phase = Phase::answering;
        break;
      case StopCause::end_of_stream:
        rec.stop_reason = StopReason::natural;
        st.phase = Phase::answering;
        break;
    }
  }

  rstrip(thinking);
  rec.thinking_text = thinking;
  rec.thinking_tokens = st.thinking_tokens_so_far;
  rec.wait_insertions = st.continuations_used;
  rec.forced_exit = rec.stop_reason == StopReason::budget_exhausted;

  if (skip_answer) {
    rec.transcript = st.transcript;
    rec.extracted_answer = extract_answer(thinking).value_or("");
    return rec;
  }

  std::optional<std::string_view> prefix;
  if (rec.forced_exit && policy.answer_prefix) prefix = *policy.answer_prefix;
  complete_answer(rec, std::move(st.transcript), policy.end_of_thinking_delimiter, prefix,
                  saturating_sub(max_total, total_used), cursor, backend, decode);
  return rec;
}

void complete_answer(GenerationRecord& rec, std::string transcript, std::string_view end_delimiter,
                     std::optional<std::string_view> answer_prefix, std::uint64_t tokens_left,
                     std::optional<std::uint64_t> cursor, const Backend& backend,
                     const DecodeParams& decode) {
  const TokenizerHandle& tok = decode.tokenizer;
  rstrip(transcript);
  transcript += render_delimiter(end_delimiter);
  std::string answer_region;
  std::uint64_t prefix_tokens = 0;
  if (answer_prefix) {
    transcript += *answer_prefix;
    answer_region = *answer_prefix;
    prefix_tokens = count_tokens(*answer_prefix, tok);
    rec.answer_prefix_applied = true;
  }

  const std::uint64_t room = saturating_sub(backend.context_window(), whitespace_token_count(transcript));
  const std::uint64_t per_call = std::min(tokens_left, room);
  if (per_call == 0) {
    rec.loop_guard_hit = true;
  } else {
    GenRequest req;
    req.context = transcript;
    req.max_new_tokens = per_call;
    req.temperature = decode.temperature;
    req.seed = decode.seed;
    req.resume_cursor = cursor;
    try {
      GenChunk chunk = backend.generate(req);
      rec.answer_tokens = count_tokens(chunk.text, tok, chunk.tokens_used);
      rec.answer_text = std::move(chunk.text);
      if (chunk.stop_cause == StopCause::length_limit) rec.loop_guard_hit = true;
    } catch (const ContextLimitError&) {
      rec.stop_reason = StopReason::context_limit;
      rec.forced_exit = false;
    }
  }
  transcript += rec.answer_text;
  answer_region += rec.answer_text;
  rec.answer_tokens_with_prefix = rec.answer_tokens + prefix_tokens;
  rec.transcript = std::move(transcript);

  auto extracted = extract_answer(answer_region);
  if (!extracted) extracted = extract_answer(rec.thinking_text);
  rec.extracted_answer = extracted.value_or("");
}

std::vector<ExtrapolationPoint> extrapolation_sweep(std::span<const BenchmarkQuestion> questions,
                                                    std::span<const std::uint64_t> n_values,
                                                    const BudgetPolicy& base, const Backend& backend,
                                                    const DecodeParams& decode) {
  if (n_values.empty()) throw ValidationError("extrapolation sweep needs at least one N");
  if (!std::is_sorted(n_values.begin(), n_values.end())) {
    throw ValidationError("N values must be sorted ascending");
  }
  if (questions.empty()) throw ValidationError("extrapolation sweep needs questions");

  std::vector<ExtrapolationPoint> out;
  for (std::uint64_t n : n_values) {
    BudgetPolicy policy = base;
    policy.forced_continuations = n;
    ExtrapolationPoint ep;
    ep.forced_continuations = n;
    double tokens = 0.0;
    std::size_t correct = 0;
    for (const auto& q : questions) {
      GenerationRecord rec;
      try {
        rec = run_budget_forced(q.prompt, policy, backend, decode, q.id);
      } catch (const BackendError&) {
        rec.question_id = q.id;
        rec.prompt = q.prompt;
        rec.stop_reason = StopReason::backend_error;
        rec.seed = decode.seed;
        rec.temperature = decode.temperature;
      }
      tokens += static_cast<double>(rec.thinking_tokens);
      if (rec.stop_reason != StopReason::backend_error &&
          match_answer(rec.extracted_answer, q.gold, q.kind)) {
        ++correct;
      }
      ep.records.push_back(std::move(rec));
    }
    const double count = static_cast<double>(questions.size());
    ep.point = EvalPoint{tokens / count, 100.0 * static_cast<double>(correct) / count};
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace ttc
