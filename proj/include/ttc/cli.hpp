#pragma once

// Command-line front end. `run_cli` is what the `ttc` binary calls; it is a
// library function so tests can drive whole commands in-process.
//
// Exit codes: 0 success, 1 validation/config error, 2 backend/transport error.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ttc/core_types.hpp"
#include "ttc/curation.hpp"
#include "ttc/lm_backend.hpp"

namespace ttc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;

struct BackendSection {
  std::string kind = "mock";  // mock | http | mock_grader
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::uint64_t context_window = kDefaultContextWindow;
  int max_attempts = 3;
  std::uint64_t timeout_s = 600;
  std::string mock_scripts;  // JSONL of {question, segments, answer[, variants]}
  std::string context_template = "{prompt}\n";  // grader/classifier wrapping
  std::uint64_t max_new_tokens = 1024;          // grader/classifier replies
};

struct AppConfig {
  BackendSection backend;
  std::optional<BackendSection> grader;
  TokenizerHandle tokenizer{TokenizerMode::backend_reported, std::nullopt};
  BudgetPolicy policy;
  // sweep defaults
  std::optional<double> temperature;  // unset: 0, or 1 for rejection/majority_vote
  std::uint64_t max_tries = 1000;
  // curation
  std::size_t target = 1000;
  std::vector<std::string> difficulty_models{"Qwen2.5-7B-Instruct", "Qwen2.5-32B-Instruct"};
  QualityFilterConfig quality;
  SeedRules seed_rules;
  std::size_t ngram = 8;
  std::string classifier = "keyword";  // keyword | lm (uses the grader backend)
  std::vector<std::string> domains;    // label set for the lm classifier
  std::vector<std::string> decontam_benchmarks;
  // global
  std::int64_t seed = 0;
  std::size_t jobs = 1;
};

/// The documented defaults as JSON (what `ttc config` prints).
json default_config_json();

/// Parses a config document. Unknown keys are rejected; "${VAR}" inside
/// strings is replaced from the environment; relative paths resolve against
/// `base_dir`.
AppConfig parse_config(const json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

/// Replaces ${VAR} occurrences; unset variables are a ConfigError.
std::string interpolate_env(const std::string& s);

/// Loads mock scripts: one JSON object per line with "question", "segments",
/// "answer" and optionally "variants" (scripts picked by seed modulo count).
std::unique_ptr<Backend> make_backend(const BackendSection& section);

/// Question texts for decontamination: JSONL rows ("prompt", "question" or
/// "problem" field) or plain text with blank-line separated questions.
std::vector<std::string> load_benchmark_texts(const std::filesystem::path& path);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ttc
