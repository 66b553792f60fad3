#include "ttc/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <unordered_map>

#include "ttc/errors.hpp"
#include "ttc/length_control.hpp"

namespace ttc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (true) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(what));
    }
  }
}

std::regex icase_regex(const std::string& pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw ConfigError("bad pattern '" + pattern + "': " + e.what());
  }
}

// U+2500..U+257F (box drawing) and U+2580..U+259F (block elements) share the
// UTF-8 lead bytes E2 94..96.
bool has_box_drawing(std::string_view line) {
  for (std::size_t i = 0; i + 2 < line.size(); ++i) {
    const auto b0 = static_cast<unsigned char>(line[i]);
    const auto b1 = static_cast<unsigned char>(line[i + 1]);
    if (b0 == 0xE2 && b1 >= 0x94 && b1 <= 0x96) return true;
  }
  return false;
}

bool is_art_line(std::string_view line) {
  if (has_box_drawing(line)) return true;
  const std::string_view t = trim(line);
  if (t.size() < 2) return false;
  // mostly drawing characters; "a - b = c" stays text, "| a | b |" is a table row
  std::size_t structural = 0;
  std::size_t other = 0;
  for (char c : t) {
    if (std::string_view("|+-_=/\\").find(c) != std::string_view::npos) {
      ++structural;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      ++other;
    }
  }
  return structural >= 2 && structural > other;
}

bool source_matches(const std::string& source, const std::vector<std::string>& labels) {
  const std::string s = lower(trim(source));
  return std::any_of(labels.begin(), labels.end(),
                     [&](const std::string& l) { return lower(trim(l)) == s; });
}

}  // namespace

std::string_view to_string(PoolStage s) {
  switch (s) {
    case PoolStage::raw: return "raw";
    case PoolStage::quality_filtered: return "quality_filtered";
    case PoolStage::difficulty_filtered: return "difficulty_filtered";
    case PoolStage::final_selection: return "final";
  }
  return "raw";
}

PoolStage pool_stage_from_string(std::string_view s) {
  if (s == "raw") return PoolStage::raw;
  if (s == "quality_filtered") return PoolStage::quality_filtered;
  if (s == "difficulty_filtered") return PoolStage::difficulty_filtered;
  if (s == "final") return PoolStage::final_selection;
  throw ParseError("unknown pool stage: " + std::string(s));
}

void to_json(json& j, const FilterLog& f) { j = json{{"id", f.id}, {"reason", f.reason}}; }

// ============================================================================
// Quality
// ============================================================================

void QualityFilterConfig::validate() const {
  for (const auto& p : figure_patterns) (void)icase_regex(p);
  for (const auto& p : extra_patterns) (void)icase_regex(p);
}

void from_json(const json& j, QualityFilterConfig& c) {
  check_keys(j,
             {"drop_empty_trace", "min_art_lines", "figure_patterns", "check_numbering_restart",
              "extra_patterns"},
             "quality filter config");
  c = QualityFilterConfig{};
  if (j.contains("drop_empty_trace")) c.drop_empty_trace = j.at("drop_empty_trace").get<bool>();
  if (j.contains("min_art_lines")) c.min_art_lines = j.at("min_art_lines").get<std::size_t>();
  if (j.contains("figure_patterns")) c.figure_patterns = j.at("figure_patterns").get<std::vector<std::string>>();
  if (j.contains("check_numbering_restart")) {
    c.check_numbering_restart = j.at("check_numbering_restart").get<bool>();
  }
  if (j.contains("extra_patterns")) c.extra_patterns = j.at("extra_patterns").get<std::vector<std::string>>();
  c.validate();
}

void to_json(json& j, const QualityFilterConfig& c) {
  j = json{{"drop_empty_trace", c.drop_empty_trace},
           {"min_art_lines", c.min_art_lines},
           {"figure_patterns", c.figure_patterns},
           {"check_numbering_restart", c.check_numbering_restart},
           {"extra_patterns", c.extra_patterns}};
}

std::optional<std::string> quality_issue(const ReasoningSample& sample, const QualityFilterConfig& config) {
  if (config.drop_empty_trace && trim(sample.reasoning_trace).empty()) {
    return "empty reasoning trace (generation error)";
  }
  const std::string& q = sample.question;

  if (config.min_art_lines > 0) {
    std::size_t run = 0;
    for (std::string_view line : split_lines(q)) {
      run = is_art_line(line) ? run + 1 : 0;
      if (run >= config.min_art_lines) return "ascii-art block";
    }
  }
  for (const auto& p : config.figure_patterns) {
    std::smatch m;
    if (std::regex_search(q, m, icase_regex(p))) return "figure reference: " + m.str(0);
  }
  if (config.check_numbering_restart) {
    static const std::regex first_item(R"(^\s*1[.)]\s)");
    int firsts = 0;
    for (std::string_view line : split_lines(q)) {
      const std::string l(line);
      if (std::regex_search(l, first_item)) ++firsts;
    }
    if (firsts >= 2) return "inconsistent numbering (restarted enumeration)";
  }
  for (const auto& p : config.extra_patterns) {
    std::smatch m;
    if (std::regex_search(q, m, icase_regex(p))) return "pattern: " + m.str(0);
  }
  return std::nullopt;
}

FilterResult quality_filter(const CurationPool& pool, const QualityFilterConfig& config) {
  if (pool.stage != PoolStage::raw) throw CurationError("quality_filter expects a raw pool");
  config.validate();
  FilterResult out;
  out.pool.stage = PoolStage::quality_filtered;
  for (const auto& s : pool.samples) {
    if (auto issue = quality_issue(s, config)) {
      out.removed.push_back({s.id, *issue});
    } else {
      out.pool.samples.push_back(s);
    }
  }
  return out;
}

// ============================================================================
// Grading
// ============================================================================

std::string build_grading_prompt(std::string_view problem, std::string_view attempt,
                                 std::string_view solution) {
  std::string p =
      "You are an AI assistant for grading a science problem.\n"
      "The user will provide you with the question itself, an attempt made by a student and the "
      "correct answer to the problem.\n"
      "Your job is to judge whether the attempt is correct by comparing it with the correct answer.\n"
      "If the expected solution concludes with a number or choice, there should be no ambiguity.\n"
      "If the expected solution involves going through the entire reasoning process, you should "
      "judge the attempt based on whether the reasoning process is correct with correct answer if "
      "helpful.\n"
      "\n"
      "The user will provide the attempt and the correct answer in the following format:\n"
      "\n"
      "# Problem\n";
  p += problem;
  p += "\n\n## Attempt\n";
  p += attempt;
  p += "\n\n## Correct answer\n";
  p += solution;
  p += "\n\nExplain your reasoning, and end your response on a new line with only \"Yes\" or \"No\" "
       "(without quotes).";
  return p;
}

std::optional<bool> parse_grader_verdict(std::string_view reply) {
  const auto lines = split_lines(reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const std::string_view t = trim(*it);
    if (t.empty()) continue;
    if (t == "Yes") return true;
    if (t == "No") return false;
    return std::nullopt;
  }
  return std::nullopt;
}

void to_json(json& j, const DifficultyGrade& g) {
  j = json{{"question_id", g.question_id},
           {"model_label", g.model_label},
           {"attempt", g.attempt},
           {"correct", g.correct ? json(*g.correct) : json(nullptr)},
           {"grader_rationale", g.grader_rationale}};
}

void from_json(const json& j, DifficultyGrade& g) {
  check_keys(j, {"question_id", "model_label", "attempt", "correct", "grader_rationale"}, "grade");
  g.question_id = j.at("question_id").get<std::string>();
  g.model_label = j.at("model_label").get<std::string>();
  g.attempt = j.value("attempt", std::string());
  g.correct.reset();
  if (j.contains("correct") && !j.at("correct").is_null()) g.correct = j.at("correct").get<bool>();
  g.grader_rationale = j.value("grader_rationale", std::string());
}

namespace {

std::string render_template(std::string_view tmpl, std::string_view prompt) {
  std::string out(tmpl);
  const auto pos = out.find("{prompt}");
  if (pos == std::string::npos) throw ConfigError("context_template needs a {prompt} placeholder");
  out.replace(pos, 8, prompt);
  return out;
}

std::string ask(const Backend& backend, const std::string& context, const GraderOptions& options,
                int attempt) {
  GenRequest req;
  req.context = context;
  req.max_new_tokens = options.max_new_tokens;
  req.temperature = options.temperature;
  req.seed = options.seed + attempt;
  return backend.generate(req).text;
}

}  // namespace

DifficultyGrade grade_attempt(std::string question_id, std::string model_label, std::string_view problem,
                              std::string attempt, std::string_view reference, const Backend& grader,
                              const GraderOptions& options) {
  DifficultyGrade g;
  g.question_id = std::move(question_id);
  g.model_label = std::move(model_label);
  const std::string context =
      render_template(options.context_template, build_grading_prompt(problem, attempt, reference));
  g.attempt = std::move(attempt);
  for (int k = 0; k <= options.reasks; ++k) {
    g.grader_rationale = ask(grader, context, options, k);
    if (auto verdict = parse_grader_verdict(g.grader_rationale)) {
      g.correct = verdict;
      return g;
    }
  }
  return g;  // ungradable
}

DifficultyResult difficulty_filter(const CurationPool& pool, std::span<const DifficultyGrade> grades,
                                   std::span<const std::string> required_models) {
  if (pool.stage != PoolStage::quality_filtered) {
    throw CurationError("difficulty_filter expects a quality-filtered pool");
  }
  if (required_models.empty()) throw ConfigError("difficulty_filter needs at least one model label");

  // (question, model) -> verdict; a later grade for the same pair wins
  std::map<std::pair<std::string, std::string>, std::optional<bool>> table;
  for (const auto& g : grades) table[{g.question_id, g.model_label}] = g.correct;

  DifficultyResult out;
  out.pool.stage = PoolStage::difficulty_filtered;
  for (const auto& s : pool.samples) {
    std::string missing;
    std::string solved_by;
    for (const auto& model : required_models) {
      auto it = table.find({s.id, model});
      if (it == table.end() || !it->second) {
        missing += (missing.empty() ? "" : ", ") + model;
      } else if (*it->second) {
        solved_by += (solved_by.empty() ? "" : ", ") + model;
      }
    }
    if (!solved_by.empty()) {
      out.removed.push_back({s.id, "solved by " + solved_by});
    } else if (!missing.empty()) {
      out.held_out.push_back({s.id, "missing or ungradable grade: " + missing});
      std::cerr << "warning: " << s.id << " held out, no usable grade from " << missing << "\n";
    } else {
      out.pool.samples.push_back(s);
    }
  }
  return out;
}

// ============================================================================
// Domains
// ============================================================================

KeywordDomainClassifier::KeywordDomainClassifier()
    : KeywordDomainClassifier(
          {
              {"Geometry", {"triangle", "circle", "polygon", "angle", "perimeter", "area of", "radius",
                            "tangent", "hexagon", "square"}},
              {"Number theory", {"prime", "divisible", "remainder", "modulo", "gcd", "integer solutions",
                                 "digits", "divisor"}},
              {"Combinatorics", {"how many ways", "arrangements", "permutation", "combination",
                                 "choose", "subsets"}},
              {"Probability", {"probability", "expected value", "random", "dice", "coin"}},
              {"Calculus", {"derivative", "integral", "limit", "differentiable", "series converge"}},
              {"Algebra", {"polynomial", "equation", "roots", "matrix", "function", "real numbers"}},
              {"Physics", {"velocity", "force", "energy", "mass", "electric", "magnetic", "quantum",
                           "momentum"}},
              {"Chemistry", {"molecule", "reaction", "compound", "mol", "acid", "electron"}},
              {"Biology", {"cell", "protein", "gene", "dna", "enzyme", "organism"}},
              {"Computer science", {"algorithm", "complexity", "program", "graph", "runtime"}},
          },
          "Other") {}

KeywordDomainClassifier::KeywordDomainClassifier(std::vector<Rule> rules, std::string fallback_domain)
    : rules_(std::move(rules)), fallback_(std::move(fallback_domain)) {
  for (auto& [domain, keywords] : rules_) {
    for (auto& k : keywords) k = lower(k);
  }
}

std::string KeywordDomainClassifier::classify(const ReasoningSample& sample) const {
  const std::string q = lower(sample.question);
  for (const auto& [domain, keywords] : rules_) {
    for (const auto& k : keywords) {
      if (q.find(k) != std::string::npos) return domain;
    }
  }
  return fallback_;
}

LmDomainClassifier::LmDomainClassifier(const Backend& backend, std::vector<std::string> domains,
                                       GraderOptions options)
    : backend_(backend), domains_(std::move(domains)), options_(std::move(options)) {
  if (domains_.empty()) throw ConfigError("LmDomainClassifier needs a domain list");
}

std::string LmDomainClassifier::classify(const ReasoningSample& sample) const {
  std::string prompt = "Classify the following question into exactly one of these domains:\n";
  for (const auto& d : domains_) prompt += "- " + d + "\n";
  prompt += "\nQuestion:\n" + sample.question +
            "\n\nEnd your response with the domain name alone on the last line.";
  const std::string reply = ask(backend_, render_template(options_.context_template, prompt), options_, 0);
  const auto lines = split_lines(reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const std::string t = lower(trim(*it));
    if (t.empty()) continue;
    for (const auto& d : domains_) {
      if (lower(d) == t) return d;
    }
    break;
  }
  return fallback_.classify(sample);
}

void assign_domains(CurationPool& pool, const DomainClassifier& classifier) {
  for (auto& s : pool.samples) {
    if (trim(s.domain).empty()) s.domain = classifier.classify(s);
  }
}

DomainIndex build_domain_index(std::span<const ReasoningSample> samples) {
  DomainIndex idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].domain.empty()) {
      throw CurationError("sample " + samples[i].id + " has no domain; classify the pool first");
    }
    idx.domains[samples[i].domain].push_back(i);
  }
  for (auto& [domain, list] : idx.domains) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      if (samples[a].thinking_token_count != samples[b].thinking_token_count) {
        return samples[a].thinking_token_count > samples[b].thinking_token_count;
      }
      return samples[a].id < samples[b].id;
    });
  }
  return idx;
}

std::vector<double> rank_weights(std::size_t count) {
  std::vector<double> w(count);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    w[i] = std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(i + 1, 2000)));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

void from_json(const json& j, SeedRules& r) {
  check_keys(j, {"aime_sources", "gpqa_sources", "math_sources", "math_min_thinking"}, "seed rules");
  r = SeedRules{};
  if (j.contains("aime_sources")) r.aime_sources = j.at("aime_sources").get<std::vector<std::string>>();
  if (j.contains("gpqa_sources")) r.gpqa_sources = j.at("gpqa_sources").get<std::vector<std::string>>();
  if (j.contains("math_sources")) r.math_sources = j.at("math_sources").get<std::vector<std::string>>();
  if (j.contains("math_min_thinking")) r.math_min_thinking = j.at("math_min_thinking").get<std::uint64_t>();
}

void to_json(json& j, const SeedRules& r) {
  j = json{{"aime_sources", r.aime_sources},
           {"gpqa_sources", r.gpqa_sources},
           {"math_sources", r.math_sources},
           {"math_min_thinking", r.math_min_thinking}};
}

bool is_seed_eligible(const ReasoningSample& s, const SeedRules& rules) {
  if (!s.gemini_correct.value_or(false)) return false;
  if (source_matches(s.source_dataset, rules.aime_sources) ||
      source_matches(s.source_dataset, rules.gpqa_sources)) {
    return true;
  }
  return source_matches(s.source_dataset, rules.math_sources) &&
         s.thinking_token_count > rules.math_min_thinking;
}

DiversityResult diversity_sample(const CurationPool& pool, std::size_t target_n, std::uint64_t seed,
                                 const SeedRules& rules) {
  if (pool.stage != PoolStage::difficulty_filtered) {
    throw CurationError("diversity_sample expects a difficulty-filtered pool");
  }
  if (target_n == 0) throw CurationError("target_n must be positive");
  const auto& samples = pool.samples;
  if (samples.size() < target_n) {
    throw CurationError("pool has " + std::to_string(samples.size()) + " questions, fewer than target " +
                        std::to_string(target_n));
  }
  {
    std::set<std::string> ids;
    for (const auto& s : samples) {
      if (!ids.insert(s.id).second) throw CurationError("duplicate sample id " + s.id + "; dedup first");
    }
  }

  DiversityResult out;
  std::vector<bool> chosen(samples.size(), false);
  std::size_t chosen_count = 0;
  for (std::size_t i = 0; i < samples.size() && chosen_count < target_n; ++i) {
    if (is_seed_eligible(samples[i], rules)) {
      chosen[i] = true;
      ++chosen_count;
      out.selection.push_back(samples[i]);
    }
  }
  out.seeded = chosen_count;

  DomainIndex index = build_domain_index(samples);
  std::vector<std::vector<std::size_t>*> active;
  for (auto& [domain, list] : index.domains) active.push_back(&list);

  std::mt19937_64 rng(seed);
  while (chosen_count < target_n) {
    if (active.empty()) throw CurationError("all domains exhausted before reaching target");
    std::uniform_int_distribution<std::size_t> pick_domain(0, active.size() - 1);
    const std::size_t d = pick_domain(rng);
    std::vector<std::size_t>& qd = *active[d];

    // ranks 1..|Q_d| over what is left, weights 2^-rank
    double total = 0.0;
    for (std::size_t r = 0; r < qd.size(); ++r) {
      total += std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(r + 1, 2000)));
    }
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    std::size_t pick = 0;
    double acc = 0.0;
    for (std::size_t r = 0; r < qd.size(); ++r) {
      acc += std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(r + 1, 2000)));
      if (u < acc) {
        pick = r;
        break;
      }
      pick = r;
    }
    const std::size_t q = qd[pick];
    if (!chosen[q]) {
      chosen[q] = true;
      ++chosen_count;
      out.selection.push_back(samples[q]);
    }
    qd.erase(qd.begin() + static_cast<std::ptrdiff_t>(pick));
    if (qd.empty()) active.erase(active.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

// ============================================================================
// Decontamination and dedup
// ============================================================================

std::vector<std::string> ngram_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> word_ngrams(std::string_view text, std::size_t n) {
  if (n == 0) throw ValidationError("n-gram size must be positive");
  const auto words = ngram_words(text);
  std::vector<std::string> grams;
  if (words.size() < n) return grams;
  grams.reserve(words.size() - n + 1);
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t k = 1; k < n; ++k) {
      g += ' ';
      g += words[i + k];
    }
    grams.push_back(std::move(g));
  }
  return grams;
}

NGramIndex::NGramIndex(std::size_t n) : n_(n) {
  if (n == 0) throw ValidationError("n-gram size must be positive");
}

void NGramIndex::add(std::string_view text) {
  for (auto& g : word_ngrams(text, n_)) grams_.insert(std::move(g));
}

std::optional<std::string> NGramIndex::first_match(std::string_view text) const {
  for (auto& g : word_ngrams(text, n_)) {
    if (grams_.count(g)) return g;
  }
  return std::nullopt;
}

DecontamResult decontaminate(const CurationPool& pool, std::span<const std::string> benchmarks,
                             std::size_t n) {
  if (benchmarks.empty()) throw ValidationError("decontaminate needs benchmark texts");
  NGramIndex index(n);
  for (const auto& b : benchmarks) index.add(b);
  DecontamResult out;
  out.pool.stage = pool.stage;
  for (const auto& s : pool.samples) {
    if (auto gram = index.first_match(s.question)) {
      out.excluded.push_back({s.id, *gram});
    } else {
      out.pool.samples.push_back(s);
    }
  }
  return out;
}

std::string dedup_key(std::string_view question) {
  std::string out;
  bool space = false;
  for (char c : trim(question)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

FilterResult dedup(const CurationPool& pool) {
  FilterResult out;
  out.pool.stage = pool.stage;
  std::unordered_map<std::string, std::string> first;
  for (const auto& s : pool.samples) {
    auto [it, inserted] = first.emplace(dedup_key(s.question), s.id);
    if (inserted) {
      out.pool.samples.push_back(s);
    } else {
      out.removed.push_back({s.id, "duplicate of " + it->second});
    }
  }
  return out;
}

// ============================================================================
// Training export
// ============================================================================

std::string_view to_string(TrainingStyle s) {
  switch (s) {
    case TrainingStyle::plain: return "plain";
    case TrainingStyle::token_instruction: return "token_instruction";
    case TrainingStyle::step_instruction: return "step_instruction";
  }
  return "plain";
}

TrainingStyle training_style_from_string(std::string_view s) {
  if (s == "plain") return TrainingStyle::plain;
  if (s == "token_instruction") return TrainingStyle::token_instruction;
  if (s == "step_instruction") return TrainingStyle::step_instruction;
  throw ConfigError("unknown training style: " + std::string(s));
}

namespace {

json span_json(const Span& s) { return json::array({s.begin, s.end}); }

Span span_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("span must be [begin, end]");
  return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

void to_json(json& j, const TrainingRecord& r) {
  json masks = json::array();
  for (const auto& s : r.loss_mask_spans) masks.push_back(span_json(s));
  j = json{{"id", r.id},
           {"style", to_string(r.style)},
           {"text", r.text},
           {"loss_mask_spans", masks},
           {"question_span", span_json(r.question_span)},
           {"trace_span", span_json(r.trace_span)},
           {"solution_span", span_json(r.solution_span)}};
}

void from_json(const json& j, TrainingRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.style = training_style_from_string(j.at("style").get<std::string>());
  r.text = j.at("text").get<std::string>();
  r.loss_mask_spans.clear();
  for (const auto& s : j.at("loss_mask_spans")) r.loss_mask_spans.push_back(span_from(s));
  r.question_span = span_from(j.at("question_span"));
  r.trace_span = span_from(j.at("trace_span"));
  r.solution_span = span_from(j.at("solution_span"));
}

ExportResult export_training_format(std::span<const ReasoningSample> selection, const ExportOptions& options) {
  ExportResult out;
  const std::string answer_block = render_delimiter(kAnswerDelimiter);
  for (const auto& s : selection) {
    const std::string& solution = s.generated_solution.empty() ? s.reference_solution : s.generated_solution;
    if (trim(s.reasoning_trace).empty()) {
      out.skipped.push_back({s.id, "missing reasoning trace"});
      std::cerr << "warning: " << s.id << " skipped, missing reasoning trace\n";
      continue;
    }
    if (solution.empty()) {
      out.skipped.push_back({s.id, "missing solution"});
      std::cerr << "warning: " << s.id << " skipped, missing solution\n";
      continue;
    }

    TrainingRecord r;
    r.id = s.id;
    r.style = options.style;
    r.text = options.user_marker + "\n";
    r.question_span.begin = r.text.size();
    r.text += s.question;
    r.question_span.end = r.text.size();

    std::string trace_body = s.reasoning_trace;
    switch (options.style) {
      case TrainingStyle::plain: break;
      case TrainingStyle::token_instruction: {
        const std::uint64_t length = s.thinking_token_count > 0 ? s.thinking_token_count
                                                                : count_tokens(s.reasoning_trace, options.tokenizer);
        const std::string prompt = build_token_prompt(s.question, token_bucket(length));
        r.text += prompt.substr(s.question.size());
        break;
      }
      case TrainingStyle::step_instruction: {
        const std::uint64_t budget = step_bucket(split_steps(s.reasoning_trace).size());
        const std::string prompt = build_step_prompt(s.question, budget);
        r.text += prompt.substr(s.question.size());
        trace_body = build_step_trace(s.reasoning_trace, budget);
        break;
      }
    }
    r.text += "\n" + options.assistant_marker + "\n";
    r.loss_mask_spans.push_back(Span{0, r.text.size()});

    if (options.style != TrainingStyle::step_instruction) {
      r.text += std::string(kThinkDelimiter) + "\n";
    }
    r.trace_span.begin = r.text.size();
    r.text += trace_body;
    r.trace_span.end = r.text.size();
    r.text += answer_block;
    r.solution_span.begin = r.text.size();
    r.text += solution;
    r.solution_span.end = r.text.size();
    out.records.push_back(std::move(r));
  }
  return out;
}

TrainingTriple parse_training_record(const TrainingRecord& r, const ExportOptions& options) {
  const std::string& t = r.text;
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw ParseError("training record " + r.id + ": " + what);
  };
  for (const Span* s : {&r.question_span, &r.trace_span, &r.solution_span}) {
    check(s->begin <= s->end && s->end <= t.size(), "span out of range");
  }
  check(r.question_span.end <= r.trace_span.begin && r.trace_span.end <= r.solution_span.begin,
        "spans out of order");
  check(r.solution_span.end == t.size(), "text continues after the solution");
  const std::string user_prefix = options.user_marker + "\n";
  check(t.compare(0, user_prefix.size(), user_prefix) == 0 && r.question_span.begin == user_prefix.size(),
        "missing user marker");
  check(r.loss_mask_spans.size() == 1 && r.loss_mask_spans[0].begin == 0, "unexpected loss mask");
  const std::size_t mask_end = r.loss_mask_spans[0].end;
  const std::string assistant = "\n" + options.assistant_marker + "\n";
  check(mask_end >= assistant.size() && mask_end <= r.trace_span.begin &&
            t.compare(mask_end - assistant.size(), assistant.size(), assistant) == 0,
        "loss mask must end with the assistant marker");
  const std::string think = r.style == TrainingStyle::step_instruction ? std::string()
                                                                        : std::string(kThinkDelimiter) + "\n";
  check(t.compare(mask_end, r.trace_span.begin - mask_end, think) == 0 &&
            r.trace_span.begin - mask_end == think.size(),
        "think delimiter misplaced");
  const std::string answer_block = render_delimiter(kAnswerDelimiter);
  check(r.solution_span.begin - r.trace_span.end == answer_block.size() &&
            t.compare(r.trace_span.end, answer_block.size(), answer_block) == 0,
        "answer delimiter misplaced");

  TrainingTriple triple;
  triple.question = t.substr(r.question_span.begin, r.question_span.end - r.question_span.begin);
  triple.solution = t.substr(r.solution_span.begin, r.solution_span.end - r.solution_span.begin);
  const std::string trace = t.substr(r.trace_span.begin, r.trace_span.end - r.trace_span.begin);
  if (r.style != TrainingStyle::step_instruction) {
    triple.trace = trace;
  } else {
    const auto steps = parse_step_trace(trace);
    check(!steps.empty(), "no steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      check(i == 0 || steps[i].first == steps[i - 1].first - 1, "step countdown broken");
      if (i > 0) triple.trace += "\n\n";
      triple.trace += steps[i].second;
    }
    check(steps.back().first >= 1, "step countdown below 1");
  }
  return triple;
}

}  // namespace ttc
