#include "ttc/lm_backend.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "ttc/errors.hpp"

namespace ttc {

void GenRequest::validate() const {
  if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be >= 1");
  if (stop_sequences.size() > kMaxStopSequences) {
    throw ValidationError("at most 4 stop sequences are supported");
  }
  for (const auto& s : stop_sequences) {
    if (s.empty()) throw ValidationError("stop sequences must be nonempty");
  }
  if (temperature < 0.0) throw ValidationError("temperature must be nonnegative");
}

std::string_view to_string(StopCause c) {
  switch (c) {
    case StopCause::stop_sequence_hit: return "stop_sequence_hit";
    case StopCause::length_limit: return "length_limit";
    case StopCause::end_of_stream: return "end_of_stream";
  }
  return "end_of_stream";
}

// ============================================================================
// MockScript
// ============================================================================

const std::string& MockScript::answer_after(std::size_t completed_segments) const {
  const std::size_t n = std::min(completed_segments, segments.size());
  for (std::size_t i = n; i > 0; --i) {
    if (segments[i - 1].answer_override) return *segments[i - 1].answer_override;
  }
  return answer_text;
}

std::uint64_t MockScript::stop_attempts() const {
  if (segments.empty()) return 1;
  std::uint64_t k = 0;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    if (segments[i].attempts_stop) ++k;
  }
  return k + 1;  // the final segment always ends in an attempt
}

std::uint64_t MockScript::thinking_tokens() const {
  std::uint64_t n = 0;
  for (const auto& s : segments) n += whitespace_token_count(s.text);
  return n;
}

void to_json(json& j, const MockSegment& s) {
  j = json{{"text", s.text}, {"attempts_stop", s.attempts_stop}};
  if (s.answer_override) j["answer_override"] = *s.answer_override;
}

void from_json(const json& j, MockSegment& s) {
  s = MockSegment{};
  j.at("text").get_to(s.text);
  if (auto it = j.find("attempts_stop"); it != j.end()) it->get_to(s.attempts_stop);
  if (auto it = j.find("answer_override"); it != j.end() && !it->is_null()) {
    s.answer_override = it->get<std::string>();
  }
}

void to_json(json& j, const MockScript& s) {
  j = json{{"segments", s.segments}, {"answer", s.answer_text}};
}

void from_json(const json& j, MockScript& s) {
  s = MockScript{};
  j.at("segments").get_to(s.segments);
  j.at("answer").get_to(s.answer_text);
}

// ============================================================================
// MockBackend
// ============================================================================

namespace {

constexpr std::uint64_t kAnswerBit = 1ULL << 63;

struct Cursor {
  bool answering = false;
  std::uint64_t segment = 0;
  std::uint64_t offset = 0;
};

std::uint64_t pack(const Cursor& c) {
  return (c.answering ? kAnswerBit : 0) | ((c.segment & 0x7FFFFFFFULL) << 32) |
         (c.offset & 0xFFFFFFFFULL);
}

Cursor unpack(std::uint64_t v) {
  return Cursor{(v & kAnswerBit) != 0, (v >> 32) & 0x7FFFFFFFULL, v & 0xFFFFFFFFULL};
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view separator(std::string_view prev, std::string_view piece) {
  if (!prev.empty() && !piece.empty() && !is_space(prev.back()) && !is_space(piece.front())) {
    return " ";
  }
  return "";
}

// Accumulates the output of one request, applying the stop-sequence scan and
// the new-token limit exactly as a completion server would.
class Emitter {
 public:
  enum class Status { complete, stopped, limited };
  struct Result {
    Status status = Status::complete;
    std::size_t consumed = 0;  // bytes of `piece` consumed (stop text included)
    std::size_t stop_index = 0;
  };

  explicit Emitter(const GenRequest& req) : req_(req) {
    for (const auto& s : req.stop_sequences) max_stop_ = std::max(max_stop_, s.size());
  }

  std::string_view prev_text() const {
    return out_.empty() ? std::string_view(req_.context) : std::string_view(out_);
  }

  Result emit(std::string_view lead, std::string_view piece) {
    std::string combined = out_;
    combined += lead;
    const std::size_t base = combined.size();
    combined += piece;

    // earliest stop occurrence that reaches past the already-emitted text
    const std::size_t scan_from = out_.size() >= max_stop_ ? out_.size() - max_stop_ + 1 : 0;
    std::size_t best_pos = std::string::npos;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < req_.stop_sequences.size(); ++i) {
      const std::string& s = req_.stop_sequences[i];
      std::size_t p = combined.find(s, scan_from);
      while (p != std::string::npos && p + s.size() <= out_.size()) p = combined.find(s, p + 1);
      if (p != std::string::npos && p < best_pos) {
        best_pos = p;
        best_idx = i;
      }
    }

    // S: start of the (limit+1)-th token, L: end of the limit-th token
    const std::uint64_t limit = req_.max_new_tokens;
    std::size_t start_over = std::string::npos;
    std::size_t end_limit = combined.size();
    std::uint64_t tokens = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < combined.size(); ++i) {
      const bool ws = is_space(combined[i]);
      if (!ws && !in_run) {
        ++tokens;
        if (tokens == limit + 1) {
          start_over = i;
          break;
        }
      }
      if (ws && in_run && tokens == limit) end_limit = i;
      in_run = !ws;
    }
    if (start_over != std::string::npos && tokens == limit + 1 && end_limit > start_over) {
      end_limit = start_over;
    }

    Result r;
    if (best_pos != std::string::npos && (start_over == std::string::npos || best_pos <= start_over)) {
      const std::size_t stop_end = best_pos + req_.stop_sequences[best_idx].size();
      out_ = combined.substr(0, best_pos);
      r.status = Status::stopped;
      r.consumed = stop_end > base ? std::min(stop_end - base, piece.size()) : 0;
      r.stop_index = best_idx;
      return r;
    }
    if (start_over != std::string::npos) {
      out_ = combined.substr(0, end_limit);
      r.status = Status::limited;
      r.consumed = end_limit > base ? end_limit - base : 0;
      return r;
    }
    out_ = std::move(combined);
    r.consumed = piece.size();
    return r;
  }

  GenChunk finish(StopCause cause, std::optional<std::size_t> stop_index, Cursor cursor) const {
    GenChunk c;
    c.text = out_;
    c.tokens_used = whitespace_token_count(out_);
    c.stop_cause = cause;
    if (stop_index) {
      c.stop_index = stop_index;
      c.matched_stop = req_.stop_sequences[*stop_index];
    }
    c.resume_cursor = pack(cursor);
    return c;
  }

 private:
  const GenRequest& req_;
  std::string out_;
  std::size_t max_stop_ = 1;
};

GenChunk emit_answer(Emitter& em, const MockScript& script, std::uint64_t completed,
                     std::uint64_t answer_offset) {
  const std::string& answer = script.answer_after(completed);
  if (answer_offset < answer.size()) {
    std::string_view piece = std::string_view(answer).substr(answer_offset);
    std::string_view lead = answer_offset == 0 ? separator(em.prev_text(), piece) : "";
    auto r = em.emit(lead, piece);
    Cursor next{true, completed, answer_offset + r.consumed};
    if (r.status == Emitter::Status::stopped) {
      return em.finish(StopCause::stop_sequence_hit, r.stop_index, next);
    }
    if (r.status == Emitter::Status::limited) return em.finish(StopCause::length_limit, {}, next);
  }
  return em.finish(StopCause::end_of_stream, {}, Cursor{true, completed, answer.size()});
}

}  // namespace

MockBackend::MockBackend(ScriptProvider provider, MockConfig config)
    : provider_(std::move(provider)), config_(std::move(config)) {}

MockBackend MockBackend::from_scripts(std::map<std::string, MockScript> scripts, MockConfig config) {
  auto table = std::make_shared<const std::map<std::string, MockScript>>(std::move(scripts));
  ScriptProvider provider = [table](std::string_view prompt, std::int64_t) -> MockScript {
    const MockScript* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [question, script] : *table) {
      if (prompt.substr(0, question.size()) == question && (!best || question.size() > best_len)) {
        best = &script;
        best_len = question.size();
      }
    }
    if (!best) throw BackendError("mock: no script for prompt", false);
    return *best;
  };
  return MockBackend(std::move(provider), std::move(config));
}

GenChunk MockBackend::generate(const GenRequest& request) const {
  request.validate();
  const std::uint64_t ctx_tokens = whitespace_token_count(request.context);
  if (ctx_tokens + request.max_new_tokens > config_.context_window) {
    throw ContextLimitError("mock: context + max_new_tokens exceeds window", ctx_tokens);
  }

  std::size_t prompt_end = request.context.size();
  for (const auto& marker : config_.generation_markers) {
    prompt_end = std::min(prompt_end, request.context.find(marker));
  }
  const std::string_view prompt = std::string_view(request.context).substr(0, prompt_end);
  const MockScript script = provider_(prompt, request.seed);
  const std::string& delim = config_.end_of_thinking_delimiter;
  const std::uint64_t n = script.segments.size();

  Emitter em(request);
  const bool has_cursor = request.resume_cursor.has_value();
  Cursor cur = has_cursor ? unpack(*request.resume_cursor) : Cursor{};

  const bool answering = request.context.find(delim, prompt_end) != std::string::npos;
  if (answering) {
    std::uint64_t completed = std::min<std::uint64_t>(cur.segment, n);
    if (!cur.answering && completed < n && cur.offset > 0 &&
        cur.offset >= script.segments[completed].text.size()) {
      ++completed;
    }
    return emit_answer(em, script, completed, cur.answering ? cur.offset : 0);
  }

  std::uint64_t j = cur.answering ? n : cur.segment;
  std::uint64_t off = cur.answering ? 0 : cur.offset;
  if (j >= n && has_cursor) {
    // the final stop attempt was suppressed: nothing left to think about
    return em.finish(StopCause::end_of_stream, {}, Cursor{false, n, 0});
  }

  std::uint64_t completed = 0;
  while (true) {
    if (j < n) {
      const MockSegment& seg = script.segments[j];
      if (off < seg.text.size()) {
        std::string_view piece = std::string_view(seg.text).substr(off);
        std::string_view lead = off == 0 ? separator(em.prev_text(), piece) : "";
        auto r = em.emit(lead, piece);
        if (r.status == Emitter::Status::stopped) {
          return em.finish(StopCause::stop_sequence_hit, r.stop_index, Cursor{false, j, off + r.consumed});
        }
        if (r.status == Emitter::Status::limited) {
          return em.finish(StopCause::length_limit, {}, Cursor{false, j, off + r.consumed});
        }
      }
      if (!seg.attempts_stop && j + 1 < n) {
        ++j;
        off = 0;
        continue;
      }
      completed = j + 1;
    } else {
      completed = n;
    }
    break;
  }

  // the model emits the end-of-thinking delimiter here
  const auto& stops = request.stop_sequences;
  if (auto it = std::find(stops.begin(), stops.end(), delim); it != stops.end()) {
    const auto idx = static_cast<std::size_t>(it - stops.begin());
    return em.finish(StopCause::stop_sequence_hit, idx, Cursor{false, completed, 0});
  }
  auto r = em.emit("", "\n" + delim + "\n");
  if (r.status == Emitter::Status::stopped) {
    return em.finish(StopCause::stop_sequence_hit, r.stop_index, Cursor{true, completed, 0});
  }
  if (r.status == Emitter::Status::limited) {
    return em.finish(StopCause::length_limit, {}, Cursor{true, completed, 0});
  }
  return emit_answer(em, script, completed, 0);
}

// ============================================================================
// Retries
// ============================================================================

GenChunk with_retries(const std::function<GenChunk()>& fn, int attempts,
                      std::chrono::milliseconds initial_backoff) {
  auto backoff = initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const ContextLimitError&) {
      throw;
    } catch (const BackendError& e) {
      if (!e.retriable() || attempt >= attempts) {
        throw BackendError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                               " attempt" + (attempt == 1 ? "" : "s") + ")",
                           false);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace ttc
