#pragma once

/**
 * Curation pipeline for small reasoning datasets.
 *
 *   raw --quality_filter--> quality_filtered --difficulty_filter-->
 *   difficulty_filtered --diversity_sample--> final
 *
 * plus n-gram decontamination against evaluation questions, exact dedup, LM
 * grading of attempts and the training-format export.
 */

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ttc/core_types.hpp"
#include "ttc/lm_backend.hpp"

namespace ttc {

enum class PoolStage { raw, quality_filtered, difficulty_filtered, final_selection };

std::string_view to_string(PoolStage s);
PoolStage pool_stage_from_string(std::string_view s);

struct CurationPool {
  std::vector<ReasoningSample> samples;
  PoolStage stage = PoolStage::raw;
};

/// Why a sample left the pool.
struct FilterLog {
  std::string id;
  std::string reason;
};

void to_json(json& j, const FilterLog& f);

struct FilterResult {
  CurationPool pool;
  std::vector<FilterLog> removed;
};

// ----------------------------------------------------------------------------
// Quality
// ----------------------------------------------------------------------------

struct QualityFilterConfig {
  bool drop_empty_trace = true;  // an empty trace means the generation call failed
  std::size_t min_art_lines = 3;  // consecutive box-drawing / pipe-art lines
  std::vector<std::string> figure_patterns{
      R"(as shown in the (figure|diagram|image|picture))",
      R"(\b(see|refer to) (the )?(figure|diagram|image|picture)\b)",
      R"(\bin the (figure|diagram|image) (below|above)\b)",
      R"(\[(img|image)\]|!\[[^\]]*\]\()",
  };
  bool check_numbering_restart = true;
  std::vector<std::string> extra_patterns;  // ECMAScript regex, case-insensitive

  void validate() const;
};

void from_json(const json& j, QualityFilterConfig& c);
void to_json(json& j, const QualityFilterConfig& c);

/// First quality problem found in the sample, if any.
std::optional<std::string> quality_issue(const ReasoningSample& sample,
                                         const QualityFilterConfig& config = {});

FilterResult quality_filter(const CurationPool& pool, const QualityFilterConfig& config = {});

// ----------------------------------------------------------------------------
// Grading and difficulty
// ----------------------------------------------------------------------------

/// The grading prompt with {problem}, {attempt} and {solution} substituted.
std::string build_grading_prompt(std::string_view problem, std::string_view attempt,
                                 std::string_view solution);

/// Verdict from the last nonempty line: exactly "Yes" or "No" (surrounding
/// whitespace ignored). Anything else is nullopt.
std::optional<bool> parse_grader_verdict(std::string_view reply);

struct DifficultyGrade {
  std::string question_id;
  std::string model_label;
  std::string attempt;
  std::optional<bool> correct;  // nullopt: ungradable
  std::string grader_rationale;

  bool operator==(const DifficultyGrade&) const = default;
};

void to_json(json& j, const DifficultyGrade& g);
void from_json(const json& j, DifficultyGrade& g);

struct GraderOptions {
  /// Raw context sent to the grader; "{prompt}" is replaced by the grading
  /// prompt. Use this to wrap it in the grader's chat template.
  std::string context_template = "{prompt}\n";
  std::uint64_t max_new_tokens = 1024;
  double temperature = 0.0;
  std::int64_t seed = 0;
  int reasks = 1;  // extra attempts after an unparseable verdict
};

DifficultyGrade grade_attempt(std::string question_id, std::string model_label, std::string_view problem,
                              std::string attempt, std::string_view reference, const Backend& grader,
                              const GraderOptions& options = {});

struct DifficultyResult {
  CurationPool pool;
  std::vector<FilterLog> removed;   // solved by at least one model
  std::vector<FilterLog> held_out;  // missing or ungradable grades
};

/// Keeps questions that every model in `required_models` got wrong.
DifficultyResult difficulty_filter(const CurationPool& pool, std::span<const DifficultyGrade> grades,
                                   std::span<const std::string> required_models);

// ----------------------------------------------------------------------------
// Domains and diversity sampling
// ----------------------------------------------------------------------------

class DomainClassifier {
 public:
  virtual ~DomainClassifier() = default;
  virtual std::string classify(const ReasoningSample& sample) const = 0;
};

/// Offline fallback: first rule whose keyword occurs in the question
/// (case-insensitive) wins; otherwise `fallback_domain`.
class KeywordDomainClassifier final : public DomainClassifier {
 public:
  using Rule = std::pair<std::string, std::vector<std::string>>;  // domain, keywords
  KeywordDomainClassifier();
  explicit KeywordDomainClassifier(std::vector<Rule> rules, std::string fallback_domain = "Other");

  std::string classify(const ReasoningSample& sample) const override;
  const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
  std::string fallback_;
};

/// Asks a backend to name one of `domains`; the last line of the reply must
/// equal a domain label. Unparseable replies fall back to keyword rules.
class LmDomainClassifier final : public DomainClassifier {
 public:
  LmDomainClassifier(const Backend& backend, std::vector<std::string> domains, GraderOptions options = {});
  std::string classify(const ReasoningSample& sample) const override;

 private:
  const Backend& backend_;
  std::vector<std::string> domains_;
  GraderOptions options_;
  KeywordDomainClassifier fallback_;
};

/// Fills empty `domain` fields.
void assign_domains(CurationPool& pool, const DomainClassifier& classifier);

/// Per domain, pool indices ranked by thinking length (longest first, ties by id).
struct DomainIndex {
  std::map<std::string, std::vector<std::size_t>> domains;
};

DomainIndex build_domain_index(std::span<const ReasoningSample> samples);

/// weights[i] = 2^-(i+1) renormalized to sum to 1 (rank 1 = longest).
std::vector<double> rank_weights(std::size_t count);

struct SeedRules {
  std::vector<std::string> aime_sources{"aime"};
  std::vector<std::string> gpqa_sources{"gpqa"};
  std::vector<std::string> math_sources{"math"};
  std::uint64_t math_min_thinking = 5600;  // strict: length > threshold
};

void from_json(const json& j, SeedRules& r);
void to_json(json& j, const SeedRules& r);

/// Gemini-correct AIME/GPQA, or Gemini-correct MATH with a long trace.
bool is_seed_eligible(const ReasoningSample& sample, const SeedRules& rules = {});

struct DiversityResult {
  std::vector<ReasoningSample> selection;  // seeds first, then loop picks in order
  std::size_t seeded = 0;
};

/// Two-stage sampling. Throws CurationError when the pool is smaller than
/// target_n, a sample has no domain, or the domains run dry early.
DiversityResult diversity_sample(const CurationPool& pool, std::size_t target_n, std::uint64_t seed,
                                 const SeedRules& rules = {});

// ----------------------------------------------------------------------------
// Decontamination and dedup
// ----------------------------------------------------------------------------

/// Lowercase, punctuation to spaces, split on whitespace.
std::vector<std::string> ngram_words(std::string_view text);

/// All word n-grams of `text` joined by single spaces.
std::vector<std::string> word_ngrams(std::string_view text, std::size_t n);

class NGramIndex {
 public:
  explicit NGramIndex(std::size_t n = 8);
  void add(std::string_view text);
  /// First n-gram of `text` found in the index.
  std::optional<std::string> first_match(std::string_view text) const;
  std::size_t n() const { return n_; }
  std::size_t size() const { return grams_.size(); }

 private:
  std::size_t n_;
  std::unordered_set<std::string> grams_;
};

struct Exclusion {
  std::string id;
  std::string gram;
};

struct DecontamResult {
  CurationPool pool;
  std::vector<Exclusion> excluded;
};

/// Drops samples whose question shares at least one normalized word n-gram
/// with any benchmark text.
DecontamResult decontaminate(const CurationPool& pool, std::span<const std::string> benchmarks,
                             std::size_t n = 8);

/// Trimmed, whitespace-collapsed question text.
std::string dedup_key(std::string_view question);

FilterResult dedup(const CurationPool& pool);

// ----------------------------------------------------------------------------
// Training export
// ----------------------------------------------------------------------------

enum class TrainingStyle { plain, token_instruction, step_instruction };

std::string_view to_string(TrainingStyle s);
TrainingStyle training_style_from_string(std::string_view s);

/// Byte range [begin, end) of TrainingRecord::text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

/// One training sequence:
///
///   <|im_start|>user\n{question}[\n\n{instruction}]\n<|im_start|>assistant\n
///   <|im_start|>think\n{trace}\n<|im_start|>answer\n{solution}
///
/// (step style replaces the think block with countdown-delimited steps).
/// loss_mask_spans cover the user turn up to and including the assistant
/// marker; everything after it (both delimiters, trace, solution) is trained.
struct TrainingRecord {
  std::string id;
  TrainingStyle style = TrainingStyle::plain;
  std::string text;
  std::vector<Span> loss_mask_spans;
  Span question_span;
  Span trace_span;
  Span solution_span;
};

void to_json(json& j, const TrainingRecord& r);
void from_json(const json& j, TrainingRecord& r);

struct ExportOptions {
  TrainingStyle style = TrainingStyle::plain;
  TokenizerHandle tokenizer{TokenizerMode::whitespace_approx, std::nullopt};
  std::string user_marker = "<|im_start|>user";
  std::string assistant_marker = "<|im_start|>assistant";
};

struct ExportResult {
  std::vector<TrainingRecord> records;
  std::vector<FilterLog> skipped;
};

/// The trained solution is generated_solution, or reference_solution when
/// that is empty. Samples without trace or solution are skipped.
ExportResult export_training_format(std::span<const ReasoningSample> selection,
                                    const ExportOptions& options = {});

struct TrainingTriple {
  std::string question;
  std::string trace;
  std::string solution;
  bool operator==(const TrainingTriple&) const = default;
};

/// Inverse of the export. Step-style traces come back with their steps
/// trimmed and rejoined by blank lines. Throws ParseError on inconsistent
/// records.
TrainingTriple parse_training_record(const TrainingRecord& record,
                                     const ExportOptions& options = {});

}  // namespace ttc
