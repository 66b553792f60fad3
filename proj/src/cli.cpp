#include "ttc/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ttc/answers.hpp"
#include "ttc/errors.hpp"
#include "ttc/harness.hpp"
#include "ttc/jsonl.hpp"
#include "ttc/strategies.hpp"

namespace fs = std::filesystem;

namespace ttc {

// ============================================================================
// Config
// ============================================================================

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
}

json interpolate_all(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_all(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_all(v);
    return out;
  }
  return j;
}

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

json backend_json(const BackendSection& b) {
  return json{{"kind", b.kind},
              {"base_url", b.base_url},
              {"model", b.model},
              {"api_key_env", b.api_key_env},
              {"context_window", b.context_window},
              {"max_attempts", b.max_attempts},
              {"timeout_s", b.timeout_s},
              {"mock_scripts", b.mock_scripts},
              {"context_template", b.context_template},
              {"max_new_tokens", b.max_new_tokens}};
}

BackendSection parse_backend(const json& j, const std::string& where, const fs::path& base) {
  check_keys(j,
             {"kind", "base_url", "model", "api_key_env", "context_window", "max_attempts", "timeout_s",
              "mock_scripts", "context_template", "max_new_tokens"},
             where);
  BackendSection b;
  b.kind = j.value("kind", b.kind);
  if (b.kind != "mock" && b.kind != "http" && b.kind != "mock_grader") {
    throw ConfigError(where + ".kind must be mock, http or mock_grader");
  }
  b.base_url = j.value("base_url", b.base_url);
  b.model = j.value("model", b.model);
  b.api_key_env = j.value("api_key_env", b.api_key_env);
  b.context_window = j.value("context_window", b.context_window);
  b.max_attempts = j.value("max_attempts", b.max_attempts);
  b.timeout_s = j.value("timeout_s", b.timeout_s);
  b.mock_scripts = resolve(j.value("mock_scripts", b.mock_scripts), base);
  b.context_template = j.value("context_template", b.context_template);
  b.max_new_tokens = j.value("max_new_tokens", b.max_new_tokens);
  return b;
}

}  // namespace

std::string interpolate_env(const std::string& s) {
  static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = s.cbegin();
  for (std::sregex_iterator it(s.begin(), s.end(), var), end; it != end; ++it) {
    const auto& m = *it;
    out.append(begin, m[0].first);
    const std::string name = m[1].str();
    const char* value = std::getenv(name.c_str());
    if (!value) throw ConfigError("environment variable " + name + " is not set");
    out += value;
    begin = m[0].second;
  }
  out.append(begin, s.cend());
  return out;
}

json default_config_json() {
  AppConfig d;
  json j;
  j["backend"] = backend_json(d.backend);
  j["grader"] = nullptr;
  j["tokenizer"] = json{{"mode", to_string(d.tokenizer.mode)}, {"vocab_id", nullptr}};
  j["policy"] = d.policy;
  j["sweep"] = json{{"temperature", nullptr}, {"max_tries", d.max_tries}};
  j["curation"] = json{{"target", d.target},
                       {"difficulty_models", d.difficulty_models},
                       {"quality", d.quality},
                       {"seed_rules", d.seed_rules},
                       {"ngram", d.ngram},
                       {"classifier", d.classifier},
                       {"domains", d.domains},
                       {"decontam_benchmarks", d.decontam_benchmarks}};
  j["seed"] = d.seed;
  j["jobs"] = d.jobs;
  return j;
}

AppConfig parse_config(const json& raw, const fs::path& base) {
  const json j = interpolate_all(raw);
  check_keys(j, {"backend", "grader", "tokenizer", "policy", "sweep", "curation", "seed", "jobs"}, "config");
  AppConfig c;
  if (j.contains("backend")) c.backend = parse_backend(j.at("backend"), "backend", base);
  if (j.contains("grader") && !j.at("grader").is_null()) c.grader = parse_backend(j.at("grader"), "grader", base);
  if (j.contains("tokenizer")) {
    const json& t = j.at("tokenizer");
    check_keys(t, {"mode", "vocab_id"}, "tokenizer");
    c.tokenizer.mode = tokenizer_mode_from_string(t.value("mode", std::string(to_string(c.tokenizer.mode))));
    if (t.contains("vocab_id") && !t.at("vocab_id").is_null()) c.tokenizer.vocab_id = t.at("vocab_id").get<std::string>();
  }
  if (j.contains("policy")) {
    c.policy = j.at("policy").get<BudgetPolicy>();
    c.policy.validate();
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"temperature", "max_tries"}, "sweep");
    if (s.contains("temperature") && !s.at("temperature").is_null()) c.temperature = s.at("temperature").get<double>();
    c.max_tries = s.value("max_tries", c.max_tries);
  }
  if (j.contains("curation")) {
    const json& k = j.at("curation");
    check_keys(k,
               {"target", "difficulty_models", "quality", "seed_rules", "ngram", "classifier", "domains",
                "decontam_benchmarks"},
               "curation");
    c.target = k.value("target", c.target);
    if (k.contains("difficulty_models")) c.difficulty_models = k.at("difficulty_models").get<std::vector<std::string>>();
    if (k.contains("quality")) c.quality = k.at("quality").get<QualityFilterConfig>();
    if (k.contains("seed_rules")) c.seed_rules = k.at("seed_rules").get<SeedRules>();
    c.ngram = k.value("ngram", c.ngram);
    c.classifier = k.value("classifier", c.classifier);
    if (c.classifier != "keyword" && c.classifier != "lm") throw ConfigError("curation.classifier must be keyword or lm");
    if (k.contains("domains")) c.domains = k.at("domains").get<std::vector<std::string>>();
    if (k.contains("decontam_benchmarks")) {
      for (const auto& p : k.at("decontam_benchmarks").get<std::vector<std::string>>()) {
        c.decontam_benchmarks.push_back(resolve(p, base));
      }
    }
  }
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  if (c.jobs == 0) throw ConfigError("jobs must be >= 1");
  return c;
}

AppConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ============================================================================
// Backends
// ============================================================================

namespace {

/// Grades by comparing the extracted final answers of attempt and reference.
GenChunk mock_grade(const GenRequest& req) {
  const std::string& c = req.context;
  const auto a = c.find("\n## Attempt\n");
  const auto s = c.find("\n\n## Correct answer\n");
  const auto e = c.rfind("\n\nExplain your reasoning");
  GenChunk chunk;
  chunk.stop_cause = StopCause::end_of_stream;
  if (a == std::string::npos || s == std::string::npos || e == std::string::npos || !(a < s && s < e)) {
    chunk.text = "I cannot find the attempt.";
  } else {
    const std::string attempt = c.substr(a + 12, s - a - 12);
    const std::string solution = c.substr(s + 20, e - s - 20);
    const std::string got = extract_answer(attempt).value_or("");
    const std::string want = extract_answer(solution).value_or(solution);
    const bool ok = !got.empty() && match_answer(got, want, AnswerKind::boxed_math);
    chunk.text = "The attempt concludes with '" + got + "'; the reference gives '" + want + "'.\n" +
                 (ok ? "Yes" : "No");
  }
  chunk.tokens_used = whitespace_token_count(chunk.text);
  return chunk;
}

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendSection& b) {
  if (b.kind == "http") {
    HttpBackendConfig h;
    h.base_url = b.base_url;
    h.model = b.model;
    h.api_key_env = b.api_key_env;
    h.context_window = b.context_window;
    h.max_attempts = b.max_attempts;
    h.timeout = std::chrono::seconds(b.timeout_s);
    return std::make_unique<HttpBackend>(h);
  }
  if (b.kind == "mock_grader") return std::make_unique<CallbackBackend>(mock_grade, b.context_window);

  if (b.mock_scripts.empty()) throw ConfigError("backend.mock_scripts is required for the mock backend");
  using Variants = std::vector<MockScript>;
  auto table = std::make_shared<std::map<std::string, Variants>>();
  for (const json& row : parse_jsonl(read_text(b.mock_scripts), b.mock_scripts)) {
    Variants v;
    if (row.contains("variants")) {
      v = row.at("variants").get<Variants>();
    } else {
      v.push_back(row.get<MockScript>());
    }
    if (v.empty()) throw ParseError("mock script without variants");
    (*table)[row.at("question").get<std::string>()] = std::move(v);
  }
  ScriptProvider provider = [table](std::string_view prompt, std::int64_t seed) -> MockScript {
    const Variants* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [question, variants] : *table) {
      if (prompt.substr(0, question.size()) == question && (!best || question.size() > best_len)) {
        best = &variants;
        best_len = question.size();
      }
    }
    if (!best) throw BackendError("mock: no script for prompt", false);
    const auto n = static_cast<std::int64_t>(best->size());
    return (*best)[static_cast<std::size_t>(((seed % n) + n) % n)];
  };
  MockConfig mc;
  mc.context_window = b.context_window;
  return std::make_unique<MockBackend>(std::move(provider), mc);
}

std::vector<std::string> load_benchmark_texts(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<std::string> out;
  if (path.extension() == ".jsonl") {
    for (const json& row : parse_jsonl(text, path.string())) {
      for (const char* key : {"prompt", "question", "problem"}) {
        if (row.contains(key)) {
          out.push_back(row.at(key).get<std::string>());
          break;
        }
      }
    }
  } else {
    std::istringstream in(text);
    std::string line, block;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        if (!block.empty()) out.push_back(block);
        block.clear();
      } else {
        block += (block.empty() ? "" : "\n") + line;
      }
    }
    if (!block.empty()) out.push_back(block);
  }
  if (out.empty()) throw ValidationError("no benchmark questions in " + path.string());
  return out;
}

// ============================================================================
// Commands
// ============================================================================

namespace {

std::vector<std::uint64_t> parse_knobs(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("bad knob value '" + part + "'");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ValidationError("no knob values given");
  return out;
}

void write_json(const fs::path& p, const json& j) { write_text_atomic(p, j.dump(2) + "\n"); }

// ---- curate ----------------------------------------------------------------

const std::vector<std::string> kStages{"dedup", "quality", "difficulty", "decontaminate", "diversity"};

std::string stage_file(const std::string& stage) {
  static const std::map<std::string, std::string> files{{"dedup", "01_dedup.jsonl"},
                                                        {"quality", "02_quality.jsonl"},
                                                        {"difficulty", "03_difficulty.jsonl"},
                                                        {"decontaminate", "04_decontaminated.jsonl"},
                                                        {"diversity", "final.jsonl"}};
  return files.at(stage);
}

struct CurateArgs {
  std::string pool;
  std::string out_dir;
  std::string stage = "all";
  std::string grades;
  std::vector<std::string> benchmarks;
  std::optional<std::size_t> target;
};

int cmd_curate(const AppConfig& cfg, const CurateArgs& a, std::ostream& out) {
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> stages;
  if (a.stage == "all") {
    stages = kStages;
  } else if (std::find(kStages.begin(), kStages.end(), a.stage) != kStages.end()) {
    stages = {a.stage};
  } else {
    throw ValidationError("unknown stage '" + a.stage + "'");
  }
  const std::size_t target = a.target.value_or(cfg.target);

  // stage report: merged with what earlier invocations recorded
  const fs::path report_path = dir / "stage_report.json";
  json report = fs::exists(report_path) ? json::parse(read_text(report_path)) : json::object();

  for (const std::string& stage : stages) {
    const auto idx = static_cast<std::size_t>(std::find(kStages.begin(), kStages.end(), stage) - kStages.begin());
    fs::path input;
    if (idx == 0 || (!a.pool.empty() && stages.size() == 1)) {
      if (a.pool.empty()) throw ValidationError("--pool is required for the " + stage + " stage");
      input = a.pool;
    } else {
      input = dir / stage_file(kStages[idx - 1]);
      if (!fs::exists(input)) {
        throw ValidationError("missing " + input.string() + "; run `ttc curate --stage " + kStages[idx - 1] + "` first");
      }
    }
    CurationPool pool;
    pool.samples = read_jsonl<ReasoningSample>(input);
    if (idx == 0) report["raw"] = pool.samples.size();
    std::vector<json> removed;

    if (stage == "dedup") {
      pool.stage = PoolStage::raw;
      FilterResult r = dedup(pool);
      for (const auto& f : r.removed) removed.push_back(f);
      pool = std::move(r.pool);
    } else if (stage == "quality") {
      pool.stage = PoolStage::raw;
      FilterResult r = quality_filter(pool, cfg.quality);
      for (const auto& f : r.removed) removed.push_back(f);
      pool = std::move(r.pool);
    } else if (stage == "difficulty") {
      if (a.grades.empty() || !fs::exists(a.grades)) {
        throw ValidationError("the difficulty stage needs grades (--grades); produce them with `ttc grade`");
      }
      pool.stage = PoolStage::quality_filtered;
      const auto grades = read_jsonl<DifficultyGrade>(a.grades);
      DifficultyResult r = difficulty_filter(pool, grades, cfg.difficulty_models);
      for (const auto& f : r.removed) removed.push_back(f);
      for (const auto& f : r.held_out) {
        json row = f;
        row["held_out"] = true;
        removed.push_back(std::move(row));
      }
      pool = std::move(r.pool);
    } else if (stage == "decontaminate") {
      std::vector<std::string> files = a.benchmarks.empty() ? cfg.decontam_benchmarks : a.benchmarks;
      if (files.empty()) {
        out << "decontaminate: no benchmark files configured, stage passes the pool through\n";
      } else {
        std::vector<std::string> texts;
        for (const auto& f : files) {
          auto t = load_benchmark_texts(f);
          texts.insert(texts.end(), t.begin(), t.end());
        }
        DecontamResult r = decontaminate(pool, texts, cfg.ngram);
        for (const auto& e : r.excluded) removed.push_back(json{{"id", e.id}, {"reason", "n-gram overlap"}, {"gram", e.gram}});
        pool = std::move(r.pool);
      }
    } else {  // diversity
      pool.stage = PoolStage::difficulty_filtered;
      std::unique_ptr<Backend> lm;
      std::unique_ptr<DomainClassifier> classifier;
      if (cfg.classifier == "lm") {
        if (!cfg.grader) throw ConfigError("curation.classifier = lm needs a grader backend section");
        lm = make_backend(*cfg.grader);
        GraderOptions go;
        go.context_template = cfg.grader->context_template;
        go.max_new_tokens = cfg.grader->max_new_tokens;
        go.seed = cfg.seed;
        classifier = std::make_unique<LmDomainClassifier>(*lm, cfg.domains, go);
      } else {
        classifier = std::make_unique<KeywordDomainClassifier>();
      }
      assign_domains(pool, *classifier);
      DiversityResult r = diversity_sample(pool, target, static_cast<std::uint64_t>(cfg.seed), cfg.seed_rules);
      pool.samples = std::move(r.selection);
      pool.stage = PoolStage::final_selection;
      report["seeded"] = r.seeded;
    }

    write_jsonl(dir / stage_file(stage), pool.samples);
    write_text_atomic(dir / ("removed_" + stage + ".jsonl"), to_jsonl(removed));
    report[stage] = pool.samples.size();
    out << std::left << std::setw(14) << stage << pool.samples.size() << "\n";
  }
  write_json(report_path, report);
  return kExitOk;
}

// ---- grade -----------------------------------------------------------------

int cmd_grade(const AppConfig& cfg, const std::string& pool_path, const std::string& attempts_path,
              const std::string& out_path, std::ostream& out) {
  if (!cfg.grader) throw ConfigError("grading needs a `grader` backend section in the config");
  const auto samples = read_jsonl<ReasoningSample>(pool_path);
  std::map<std::string, const ReasoningSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  const auto attempts = parse_jsonl(read_text(attempts_path), attempts_path);
  const auto grader = make_backend(*cfg.grader);
  GraderOptions go;
  go.context_template = cfg.grader->context_template;
  go.max_new_tokens = cfg.grader->max_new_tokens;
  go.seed = cfg.seed;

  std::vector<DifficultyGrade> grades(attempts.size());
  parallel_for(attempts.size(), cfg.jobs, [&](std::size_t i) {
    const json& row = attempts[i];
    const std::string qid = row.at("question_id").get<std::string>();
    auto it = by_id.find(qid);
    if (it == by_id.end()) throw ValidationError("attempt for unknown question " + qid);
    grades[i] = grade_attempt(qid, row.at("model_label").get<std::string>(), it->second->question,
                              row.at("attempt").get<std::string>(), it->second->reference_solution, *grader, go);
  });
  write_jsonl(out_path, grades);
  std::size_t ungradable = 0;
  for (const auto& g : grades) ungradable += !g.correct.has_value();
  out << "graded " << grades.size() << " attempts (" << ungradable << " ungradable)\n";
  return kExitOk;
}

// ---- sweep / reject / report -----------------------------------------------

struct SweepArgs {
  std::string method = "budget_forcing";
  std::string knobs;
  std::string benchmark;
  std::string name;
  std::string out_dir;
  bool enforce = false;
  std::string bf_knob = "continuations";
  std::optional<double> temperature;
  std::optional<std::uint64_t> max_tries;
  std::optional<double> a_min;
  std::optional<double> a_max;
};

void write_artifacts(const fs::path& dir, const SweepSummary& s, const std::vector<ScoredRecord>* records) {
  fs::create_directories(dir);
  if (records) write_jsonl(dir / "records.jsonl", *records);
  write_text_atomic(dir / "curve.csv", sweep_csv(s));
  write_json(dir / "report.json", report_json(s));
}

void print_report(const SweepSummary& s, std::ostream& out) {
  const MethodReport& r = s.report;
  out << "benchmark " << s.benchmark << "\n";
  out << std::left << std::setw(20) << "method" << std::setw(12) << "control%" << std::setw(22)
      << "scaling(pp/1k tok)" << std::setw(14) << "performance" << "runs\n";
  out << std::setw(20) << r.method_label << std::setw(12) << format_number(r.control_pct) << std::setw(22)
      << (r.scaling_slope ? format_number(pp_per_kilotoken(*r.scaling_slope)) : std::string("n/a"))
      << std::setw(14) << format_number(r.performance) << r.run_count << "\n";
  for (const auto& k : s.knobs) {
    out << "  knob " << k.knob << ": compute " << format_number(k.point.compute) << ", accuracy "
        << format_number(k.point.accuracy);
    if (k.mean_tries) out << ", mean tries " << format_number(*k.mean_tries);
    out << "\n";
  }
}

int cmd_sweep(const AppConfig& cfg, const SweepArgs& a, std::ostream& out) {
  Benchmark bench = load_benchmark(a.benchmark, a.name);
  SweepSpec spec;
  spec.method = sweep_method_from_string(a.method);
  spec.knob_values = parse_knobs(a.knobs);
  const bool sampling = spec.method == SweepMethod::rejection || spec.method == SweepMethod::majority_vote;
  spec.decode.temperature = a.temperature.value_or(cfg.temperature.value_or(sampling ? 1.0 : 0.0));
  spec.decode.seed = cfg.seed;
  spec.decode.tokenizer = cfg.tokenizer;
  spec.policy = cfg.policy;
  spec.enforce = a.enforce;
  if (a.bf_knob == "cap") {
    spec.bf_knob = BfKnob::thinking_cap;
  } else if (a.bf_knob != "continuations") {
    throw ValidationError("--bf-knob must be continuations or cap");
  }
  spec.max_tries = a.max_tries.value_or(cfg.max_tries);
  if (a.a_min || a.a_max) spec.bounds = ControlBounds{a.a_min, a.a_max};
  spec.jobs = cfg.jobs;

  const auto backend = make_backend(cfg.backend);
  SweepResult r = run_sweep(bench, spec, *backend);
  write_artifacts(a.out_dir, r.summary, &r.records);
  print_report(r.summary, out);
  const auto failed = std::count_if(r.records.begin(), r.records.end(), [](const ScoredRecord& s) {
    return s.record.stop_reason == StopReason::backend_error;
  });
  if (failed > 0) {
    // artifacts are kept (failures graded as incorrect) but the sweep is incomplete
    throw BackendError(std::to_string(failed) + " generation(s) failed", false);
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_dir, std::ostream& out) {
  std::vector<ScoredRecord> records;
  for (const auto& f : files) {
    auto rs = read_jsonl<ScoredRecord>(f);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  const SweepSummary s = summarize(records);
  print_report(s, out);
  if (!out_dir.empty()) write_artifacts(out_dir, s, nullptr);
  return kExitOk;
}

// ---- vote ------------------------------------------------------------------

int cmd_vote(const std::string& records_path, const std::string& ks, const std::string& out_path, std::ostream& out) {
  const auto records = read_jsonl<ScoredRecord>(records_path);
  if (records.empty()) throw ValidationError("no ballots in " + records_path);
  // question -> sample_index -> record (ballots repeated across knobs collapse)
  std::map<std::string, std::map<std::uint64_t, const ScoredRecord*>> ballots;
  for (const auto& r : records) ballots[r.record.question_id].emplace(r.sample_index, &r);

  json result = json::object();
  for (std::uint64_t k : parse_knobs(ks)) {
    if (k == 0) throw ValidationError("k must be positive");
    json questions = json::array();
    std::size_t correct = 0;
    for (const auto& [qid, by_index] : ballots) {
      if (by_index.size() < k) {
        throw ValidationError("question " + qid + " has " + std::to_string(by_index.size()) + " ballots, fewer than k=" +
                              std::to_string(k));
      }
      std::vector<std::string> answers;
      for (auto it = by_index.begin(); answers.size() < k; ++it) answers.push_back(it->second->record.extracted_answer);
      const VoteTally t = majority_vote(answers);
      const ScoredRecord& any = *by_index.begin()->second;
      const bool ok = match_answer(t.winner, any.gold, any.answer_kind);
      correct += ok;
      json q = t;
      q["question_id"] = qid;
      q["correct"] = ok;
      questions.push_back(std::move(q));
    }
    const double acc = 100.0 * static_cast<double>(correct) / static_cast<double>(ballots.size());
    result[std::to_string(k)] = json{{"accuracy", acc}, {"questions", std::move(questions)}};
    out << "k=" << k << " accuracy " << format_number(acc) << "\n";
  }
  if (!out_path.empty()) write_json(out_path, result);
  return kExitOk;
}

// ---- decontaminate / export ------------------------------------------------

int cmd_decontaminate(const AppConfig& cfg, const std::string& pool_path, const std::vector<std::string>& benches,
                      const std::string& out_path, const std::string& log_path, std::ostream& out) {
  CurationPool pool;
  pool.samples = read_jsonl<ReasoningSample>(pool_path);
  std::vector<std::string> texts;
  for (const auto& f : benches.empty() ? cfg.decontam_benchmarks : benches) {
    auto t = load_benchmark_texts(f);
    texts.insert(texts.end(), t.begin(), t.end());
  }
  const DecontamResult r = decontaminate(pool, texts, cfg.ngram);
  write_jsonl(out_path, r.pool.samples);
  if (!log_path.empty()) {
    std::vector<json> log;
    for (const auto& e : r.excluded) log.push_back(json{{"id", e.id}, {"gram", e.gram}});
    write_text_atomic(log_path, to_jsonl(log));
  }
  out << "kept " << r.pool.samples.size() << ", excluded " << r.excluded.size() << "\n";
  return kExitOk;
}

int cmd_export(const AppConfig& cfg, const std::string& pool_path, const std::string& style,
               const std::string& out_path, std::ostream& out) {
  const auto samples = read_jsonl<ReasoningSample>(pool_path);
  ExportOptions opts;
  opts.style = training_style_from_string(style);
  if (cfg.tokenizer.mode != TokenizerMode::backend_reported) opts.tokenizer = cfg.tokenizer;
  const ExportResult r = export_training_format(samples, opts);
  write_jsonl(out_path, r.records);
  out << "exported " << r.records.size() << ", skipped " << r.skipped.size() << "\n";
  return kExitOk;
}

}  // namespace

// ============================================================================
// Entry point
// ============================================================================

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Test-time compute control toolkit: budget-forced decoding, sweeps, metrics and data curation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<std::size_t> jobs;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed override");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* config_cmd = app.add_subcommand("config", "Print the default configuration reference");

  CurateArgs curate;
  auto* curate_cmd = app.add_subcommand("curate", "Run the curation pipeline (resumable per stage)");
  curate_cmd->add_option("--pool", curate.pool, "Raw pool JSONL (or stage input for a single stage)");
  curate_cmd->add_option("--out", curate.out_dir, "Output directory")->required();
  curate_cmd->add_option("--stage", curate.stage, "all|dedup|quality|difficulty|decontaminate|diversity");
  curate_cmd->add_option("--grades", curate.grades, "Grades JSONL from `ttc grade`");
  curate_cmd->add_option("--benchmark", curate.benchmarks, "Benchmark file(s) for decontamination");
  curate_cmd->add_option("--target", curate.target, "Selection size");

  std::string grade_pool, grade_attempts, grade_out;
  auto* grade_cmd = app.add_subcommand("grade", "Grade model attempts against reference solutions");
  grade_cmd->add_option("--pool", grade_pool, "Pool JSONL with questions and references")->required();
  grade_cmd->add_option("--attempts", grade_attempts, "JSONL of {question_id, model_label, attempt}")->required();
  grade_cmd->add_option("--out", grade_out, "Grades JSONL")->required();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a method across knob values");
  sweep_cmd->add_option("--method", sweep.method,
                        "budget_forcing|token_conditional|step_conditional|class_conditional|rejection|majority_vote");
  sweep_cmd->add_option("--knobs", sweep.knobs, "Comma-separated knob values")->required();
  sweep_cmd->add_option("--benchmark", sweep.benchmark, "Benchmark JSONL")->required();
  sweep_cmd->add_option("--name", sweep.name, "Benchmark name (default: file stem)");
  sweep_cmd->add_option("--out", sweep.out_dir, "Output directory")->required();
  sweep_cmd->add_flag("--enforce", sweep.enforce, "Budget-force token/step-conditional runs");
  sweep_cmd->add_option("--bf-knob", sweep.bf_knob, "budget_forcing knob: continuations|cap");
  sweep_cmd->add_option("--temperature", sweep.temperature, "Sampling temperature");
  sweep_cmd->add_option("--max-tries", sweep.max_tries, "Rejection sampling attempts");
  sweep_cmd->add_option("--a-min", sweep.a_min, "Control lower bound (overrides method rule)");
  sweep_cmd->add_option("--a-max", sweep.a_max, "Control upper bound (overrides method rule)");

  SweepArgs reject;
  reject.method = "rejection";
  auto* reject_cmd = app.add_subcommand("reject", "Rejection-sampling sweep over thinking budgets");
  reject_cmd->add_option("--budgets", reject.knobs, "Comma-separated budgets")->required();
  reject_cmd->add_option("--benchmark", reject.benchmark, "Benchmark JSONL")->required();
  reject_cmd->add_option("--name", reject.name, "Benchmark name");
  reject_cmd->add_option("--out", reject.out_dir, "Output directory")->required();
  reject_cmd->add_option("--temperature", reject.temperature, "Sampling temperature (default 1)");
  reject_cmd->add_option("--max-tries", reject.max_tries, "Attempts per question");

  std::vector<std::string> report_files;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Recompute metrics from records JSONL");
  report_cmd->add_option("records", report_files, "Records JSONL file(s)")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Write report.json and curve.csv here");

  std::string vote_records, vote_k = "1,2,4,8,16,32,64", vote_out;
  auto* vote_cmd = app.add_subcommand("vote", "Majority-vote persisted ballots");
  vote_cmd->add_option("--records", vote_records, "Ballot records JSONL")->required()->check(CLI::ExistingFile);
  vote_cmd->add_option("--k", vote_k, "Comma-separated ballot counts");
  vote_cmd->add_option("--out", vote_out, "Tallies JSON");

  std::string dc_pool, dc_out, dc_log;
  std::vector<std::string> dc_bench;
  auto* dc_cmd = app.add_subcommand("decontaminate", "Drop samples sharing an n-gram with benchmark questions");
  dc_cmd->add_option("--pool", dc_pool, "Pool JSONL")->required()->check(CLI::ExistingFile);
  dc_cmd->add_option("--benchmark", dc_bench, "Benchmark file(s)");
  dc_cmd->add_option("--out", dc_out, "Filtered pool JSONL")->required();
  dc_cmd->add_option("--log", dc_log, "Exclusion log JSONL");

  std::string ex_pool, ex_style = "plain", ex_out;
  auto* ex_cmd = app.add_subcommand("export-train", "Write training records with loss-mask spans");
  ex_cmd->add_option("--pool", ex_pool, "Selection JSONL")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--style", ex_style, "plain|token_instruction|step_instruction");
  ex_cmd->add_option("--out", ex_out, "Training JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;

    if (config_cmd->parsed()) {
      out << default_config_json().dump(2) << "\n";
      return kExitOk;
    }
    if (curate_cmd->parsed()) return cmd_curate(cfg, curate, out);
    if (grade_cmd->parsed()) return cmd_grade(cfg, grade_pool, grade_attempts, grade_out, out);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, sweep, out);
    if (reject_cmd->parsed()) return cmd_sweep(cfg, reject, out);
    if (report_cmd->parsed()) return cmd_report(report_files, report_out, out);
    if (vote_cmd->parsed()) return cmd_vote(vote_records, vote_k, vote_out, out);
    if (dc_cmd->parsed()) return cmd_decontaminate(cfg, dc_pool, dc_bench, dc_out, dc_log, out);
    if (ex_cmd->parsed()) return cmd_export(cfg, ex_pool, ex_style, ex_out, out);
  } catch (const BackendError& e) {
    err << "backend error: " << e.what()
        << "\nhint: check that the completion server is reachable (backend.base_url) and retry\n";
    return kExitBackend;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace ttc
