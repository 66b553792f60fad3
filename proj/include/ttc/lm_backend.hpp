#pragma once

/**
 * Token-generation backends.
 *
 * A Backend turns a raw text context into a continuation chunk, honoring stop
 * sequences and a new-token limit. The budget-forcing controllers only need
 * this surface: delimiter suppression is stop-sequence interception followed
 * by a resumed request, so any completion server that exposes stop sequences
 * can be controlled.
 *
 * Implementations:
 * - MockBackend: deterministic scripted playback (whitespace tokens). Each
 *   request carries its own cursor (GenRequest::resume_cursor), so the
 *   backend itself holds no mutable state and is safe under concurrency.
 * - CallbackBackend: wraps a function; handy for graders and tests.
 * - HttpBackend: OpenAI-compatible text-completion client.
 */

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/core_types.hpp"

namespace ttc {

inline constexpr std::uint64_t kDefaultContextWindow = 32768;
inline constexpr std::size_t kMaxStopSequences = 4;

struct GenRequest {
  std::string context;
  std::vector<std::string> stop_sequences;  // at most 4, each nonempty
  std::uint64_t max_new_tokens = 1;
  double temperature = 0.0;
  std::int64_t seed = 0;
  /// Opaque playback position returned by the previous chunk of the same
  /// decode. Servers that keep no per-request state ignore it.
  std::optional<std::uint64_t> resume_cursor;

  void validate() const;
};

enum class StopCause { stop_sequence_hit, length_limit, end_of_stream };

std::string_view to_string(StopCause c);

struct GenChunk {
  std::string text;  // never includes the matched stop sequence
  std::uint64_t tokens_used = 0;
  StopCause stop_cause = StopCause::end_of_stream;
  std::optional<std::size_t> stop_index;  // index into GenRequest::stop_sequences
  std::optional<std::string> matched_stop;
  std::optional<std::uint64_t> resume_cursor;

  bool operator==(const GenChunk&) const = default;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Throws BackendError (retriable for transport failures) or
  /// ContextLimitError when context + max_new_tokens exceeds the window.
  virtual GenChunk generate(const GenRequest& request) const = 0;
  virtual std::uint64_t context_window() const = 0;
};

inline GenChunk generate(const GenRequest& request, const Backend& backend) {
  return backend.generate(request);
}

inline std::uint64_t context_window(const Backend& backend) { return backend.context_window(); }

// ============================================================================
// Scripted mock
// ============================================================================

/// One stretch of scripted thinking. When `attempts_stop` is set the model
/// tries to emit the end-of-thinking delimiter right after it. An
/// `answer_override` replaces the final answer once this segment has been
/// fully generated (models a self-correction after "Wait").
struct MockSegment {
  std::string text;
  bool attempts_stop = false;
  std::optional<std::string> answer_override;

  bool operator==(const MockSegment&) const = default;
};

/// The model's thinking stream. After the last segment the model always
/// attempts the delimiter, then answers with the current answer text.
struct MockScript {
  std::vector<MockSegment> segments;
  std::string answer_text;

  /// Answer the model gives after `completed_segments` full segments.
  const std::string& answer_after(std::size_t completed_segments) const;
  std::uint64_t stop_attempts() const;
  std::uint64_t thinking_tokens() const;

  bool operator==(const MockScript&) const = default;
};

void to_json(json& j, const MockSegment& s);
void from_json(const json& j, MockSegment& s);
void to_json(json& j, const MockScript& s);
void from_json(const json& j, MockScript& s);

struct MockConfig {
  std::uint64_t context_window = kDefaultContextWindow;
  /// The prompt is the context up to the first of these markers.
  std::vector<std::string> generation_markers{std::string(kThinkDelimiter),
                                              "<|im_start|>assistant"};
  std::string end_of_thinking_delimiter{kAnswerDelimiter};
};

/// Picks the script for a prompt (context before the generation marker) and seed.
using ScriptProvider = std::function<MockScript(std::string_view prompt, std::int64_t seed)>;

class MockBackend final : public Backend {
 public:
  explicit MockBackend(ScriptProvider provider, MockConfig config = {});

  /// Script table keyed by question text; a context matches the longest
  /// question it starts with.
  static MockBackend from_scripts(std::map<std::string, MockScript> scripts, MockConfig config = {});

  GenChunk generate(const GenRequest& request) const override;
  std::uint64_t context_window() const override { return config_.context_window; }
  const MockConfig& config() const { return config_; }

 private:
  ScriptProvider provider_;
  MockConfig config_;
};

// ============================================================================
// Callback backend
// ============================================================================

class CallbackBackend final : public Backend {
 public:
  using Fn = std::function<GenChunk(const GenRequest&)>;
  explicit CallbackBackend(Fn fn, std::uint64_t window = kDefaultContextWindow)
      : fn_(std::move(fn)), window_(window) {}

  GenChunk generate(const GenRequest& request) const override { return fn_(request); }
  std::uint64_t context_window() const override { return window_; }

 private:
  Fn fn_;
  std::uint64_t window_;
};

// ============================================================================
// OpenAI-compatible HTTP client
// ============================================================================

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";  // POSTs to {base_url}/completions
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::uint64_t context_window = kDefaultContextWindow;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{600};
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  GenChunk generate(const GenRequest& request) const override;
  std::uint64_t context_window() const override { return config_.context_window; }

  /// Builds the JSON request body (exposed for tests).
  json request_body(const GenRequest& request) const;
  /// Parses a completion response body into a chunk (exposed for tests).
  static GenChunk parse_response(const json& body, const GenRequest& request);

 private:
  GenChunk generate_once(const GenRequest& request) const;

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Runs `fn` up to `attempts` times, sleeping initial_backoff * 2^k between
/// tries, as long as it throws a retriable BackendError.
GenChunk with_retries(const std::function<GenChunk()>& fn, int attempts,
                      std::chrono::milliseconds initial_backoff);

}  // namespace ttc
