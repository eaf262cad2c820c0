#include "cotlab/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "cotlab/generator.hpp"
#include "cotlab/inference.hpp"
#include "cotlab/jsonl.hpp"
#include "cotlab/reflection.hpp"
#include "cotlab/report.hpp"
#include "cotlab/responder.hpp"
#include "cotlab/rng.hpp"

namespace cotlab {

std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text) {
  const std::size_t dots = text.find("..");
  if (dots == std::string::npos)
    throw ConfigInvalid("range must look like 'lo..hi': " + text);
  try {
    const std::int64_t lo = std::stoll(text.substr(0, dots));
    const std::int64_t hi = std::stoll(text.substr(dots + 2));
    return {lo, hi};
  } catch (const std::exception&) {
    throw ConfigInvalid("range must look like 'lo..hi': " + text);
  }
}

void PipelineConfig::apply_override(const std::string& key,
                                    const nlohmann::json& value) {
  try {
    if (key == "out_dir") out_dir = value.get<std::string>();
    else if (key == "label") label = value.get<std::string>();
    else if (key == "n") n = value.get<int>();
    else if (key == "seed") seed = value.get<std::uint64_t>();
    else if (key == "ops") ops = value.get<std::string>();
    else if (key == "operands") operands = value.get<std::string>();
    else if (key == "magnitude_cap") magnitude_cap = value.get<std::int64_t>();
    else if (key == "allow_negative_intermediates")
      allow_negative_intermediates = value.get<bool>();
    else if (key == "problems_file") problems_file = value.get<std::string>();
    else if (key == "mode") mode = value.get<std::string>();
    else if (key == "k") k = value.get<int>();
    else if (key == "epsilon") epsilon = value.get<double>();
    else if (key == "reflection_rate") reflection_rate = value.get<double>();
    else if (key == "endpoint") endpoint = value.get<std::string>();
    else if (key == "model") model = value.get<std::string>();
    else if (key == "auth_env") auth_env = value.get<std::string>();
    else if (key == "concurrency") concurrency = value.get<int>();
    else if (key == "temperature") temperature = value.get<double>();
    else if (key == "top_p") top_p = value.get<double>();
    else if (key == "max_tokens") max_tokens = value.get<int>();
    else if (key == "timeout_seconds") timeout_seconds = value.get<double>();
    else if (key == "retries") retries = value.get<int>();
    else if (key == "answer_mode") answer_mode = value.get<std::string>();
    else if (key == "reflect") reflect = value.get<bool>();
    else if (key == "policy") policy = value.get<std::string>();
    else if (key == "judge_endpoint") judge_endpoint = value.get<std::string>();
    else if (key == "judge_model") judge_model = value.get<std::string>();
    else if (key == "keywords_file") keywords_file = value.get<std::string>();
    else if (key == "fit") fit = value.get<bool>();
    else if (key == "fit_method") fit_method = value.get<std::string>();
    else if (key == "format") format = value.get<std::string>();
    else throw ConfigInvalid("unknown config key: " + key);
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigInvalid("config key '" + key + "': " + e.what());
  }
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigInvalid("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigInvalid("config must be a flat JSON object");

  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) cfg.apply_override(key, value);
  return cfg;
}

std::vector<ChainObservation> bin_by_op_count(
    const std::vector<ScoredResponse>& scored) {
  std::map<int, std::pair<long long, long long>> bins;  // length -> (succ, trials)
  for (const ScoredResponse& s : scored) {
    if (!s.op_count)
      throw Error("scored response " + s.problem_id +
                  " carries no op_count; supply a problems file with op_count");
    auto& [successes, trials] = bins[*s.op_count];
    successes += s.correct ? 1 : 0;
    trials += 1;
  }
  std::vector<ChainObservation> observations;
  observations.reserve(bins.size());
  for (const auto& [length, counts] : bins)
    observations.push_back({length, counts.first, counts.second});
  return observations;
}

namespace {

namespace fs = std::filesystem;

struct StagePaths {
  std::string problems, responses, scores, stats, labels, reflection, fit, run,
      report;
};

StagePaths stage_paths(const PipelineConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  StagePaths p;
  p.problems = cfg.problems_file.empty() ? (dir / "problems.jsonl").string()
                                         : cfg.problems_file;
  p.responses = (dir / "responses.jsonl").string();
  p.scores = (dir / "scores.jsonl").string();
  p.stats = (dir / "stats.json").string();
  p.labels = (dir / "labels.jsonl").string();
  p.reflection = (dir / "reflection.json").string();
  p.fit = (dir / "fit.json").string();
  p.run = (dir / "run.json").string();
  const char* ext = cfg.format == "json" ? "report.json"
                    : cfg.format == "markdown" || cfg.format == "md"
                        ? "report.md"
                        : "report.csv";
  p.report = (dir / ext).string();
  return p;
}

template <typename Fn>
void stage(const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

GenerationConfig generation_config(const PipelineConfig& cfg) {
  const auto [op_lo, op_hi] = parse_range(cfg.ops);
  const auto [operand_lo, operand_hi] = parse_range(cfg.operands);
  GenerationConfig gen;
  gen.op_count_min = static_cast<int>(op_lo);
  gen.op_count_max = static_cast<int>(op_hi);
  gen.operand_min = operand_lo;
  gen.operand_max = operand_hi;
  gen.magnitude_cap = cfg.magnitude_cap;
  gen.allow_negative_intermediates = cfg.allow_negative_intermediates;
  gen.seed = cfg.seed;
  return gen;
}

// Deterministic per (suite seed, problem id, sample index) so interrupted
// synthetic runs resume to byte-identical records.
std::uint64_t response_seed(std::uint64_t base, const std::string& problem_id,
                            int sample_index) {
  return derive_stream_seed(mix_seed(base, fnv64(problem_id)),
                            static_cast<std::uint64_t>(sample_index));
}

void respond_synthetic(const PipelineConfig& cfg,
                       const std::vector<ProblemInstance>& problems,
                       const std::string& responses_path) {
  RecordStore store(responses_path);
  store.truncate_partial_tail();
  const RunManifest manifest = store.scan();
  ResponderTemplate tmpl;
  tmpl.reflection_rate = cfg.reflection_rate;
  char label[64];
  std::snprintf(label, sizeof(label), "synthetic(eps=%g)", cfg.epsilon);
  tmpl.model_label = label;
  for (const ProblemInstance& p : problems) {
    for (int j = 0; j < cfg.k; ++j) {
      if (manifest.completed.count({p.id, j}) != 0) continue;
      store.append(synthetic_respond(p, cfg.epsilon,
                                     response_seed(cfg.seed, p.id, j), tmpl, j));
    }
  }
}

void respond_endpoint(const PipelineConfig& cfg,
                      const std::vector<ProblemInstance>& problems,
                      const std::string& responses_path) {
  SamplingConfig sampling;
  sampling.k = cfg.k;
  sampling.temperature = cfg.temperature;
  sampling.top_p = cfg.top_p;
  sampling.max_tokens = cfg.max_tokens;
  EndpointConfig endpoint;
  endpoint.base_url = cfg.endpoint;
  endpoint.model_name = cfg.model;
  endpoint.auth_token_env = cfg.auth_env;
  endpoint.max_concurrency = cfg.concurrency;
  endpoint.timeout_seconds = cfg.timeout_seconds;
  endpoint.retry_max_attempts = cfg.retries;
  RecordStore store(responses_path);
  const RunSummary summary =
      sample_completions(problems, sampling, endpoint, store);
  if (summary.failed > 0) {
    std::string msg = std::to_string(summary.failed) + " requests failed";
    for (const std::string& f : summary.failures) msg += "\n  " + f;
    throw Error(msg);
  }
}

bool responses_complete(const std::string& responses_path,
                        const std::vector<ProblemInstance>& problems, int k) {
  if (!fs::exists(responses_path)) return false;
  const RunManifest manifest = resume_manifest(responses_path);
  for (const ProblemInstance& p : problems)
    for (int j = 0; j < k; ++j)
      if (manifest.completed.count({p.id, j}) == 0) return false;
  return true;
}

}  // namespace

void run_pipeline(const PipelineConfig& cfg) {
  if (cfg.mode != "synthetic" && cfg.mode != "endpoint")
    throw StageError("config", "mode must be 'synthetic' or 'endpoint'");
  if (cfg.mode == "endpoint" && (cfg.endpoint.empty() || cfg.model.empty()))
    throw StageError("config", "endpoint mode requires endpoint and model");
  const StagePaths paths = stage_paths(cfg);
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  // gen: external problems are used as-is; otherwise generate when missing
  // or incomplete.
  stage("gen", [&] {
    if (!cfg.problems_file.empty()) return;
    if (fs::exists(paths.problems) &&
        count_lines(paths.problems) == static_cast<std::size_t>(cfg.n))
      return;
    write_problems_jsonl(generate_suite(generation_config(cfg), cfg.n),
                         paths.problems);
  });

  // sample | simulate
  const std::string respond_stage =
      cfg.mode == "synthetic" ? "simulate" : "sample";
  stage(respond_stage, [&] {
    if (!fs::exists(paths.problems)) {
      // Without problems the stage can only be skipped if prior responses
      // exist; score will then report the missing file.
      if (fs::exists(paths.responses)) return;
      throw Error("problems file " + paths.problems + " does not exist");
    }
    const auto problems = read_problems_jsonl(paths.problems);
    if (responses_complete(paths.responses, problems, cfg.k)) return;
    if (cfg.mode == "synthetic")
      respond_synthetic(cfg, problems, paths.responses);
    else
      respond_endpoint(cfg, problems, paths.responses);
  });

  // score
  stage("score", [&] {
    const std::size_t n_responses = count_lines(paths.responses);
    if (fs::exists(paths.scores) && fs::exists(paths.stats) &&
        count_lines(paths.scores) == n_responses)
      return;
    const auto records = read_records_jsonl(paths.responses);
    const auto truth = load_ground_truth(
        paths.problems, cfg.answer_mode == "exact-string"
                            ? AnswerMode::exact_string
                            : AnswerMode::integer);
    auto scored = score_records(records, truth);
    std::sort(scored.begin(), scored.end(),
              [](const ScoredResponse& a, const ScoredResponse& b) {
                return a.problem_id != b.problem_id
                           ? a.problem_id < b.problem_id
                           : a.sample_index < b.sample_index;
              });
    write_scores_jsonl(scored, paths.scores);
    write_stats_json(aggregate_avg_at_k(scored, cfg.k), paths.stats);
  });

  // reflect (optional)
  if (cfg.reflect) {
    stage("reflect", [&] {
      const std::size_t n_responses = count_lines(paths.responses);
      if (fs::exists(paths.labels) && fs::exists(paths.reflection) &&
          count_lines(paths.labels) == n_responses)
        return;
      const auto records = read_records_jsonl(paths.responses);
      const KeywordPool pool = cfg.keywords_file.empty()
                                   ? KeywordPool::default_pool()
                                   : KeywordPool::from_file(cfg.keywords_file);
      const ReflectionPolicy policy = reflection_policy_from_string(cfg.policy);
      std::unique_ptr<HttpJudgeClient> judge;
      if (policy != ReflectionPolicy::keyword_only) {
        if (cfg.judge_endpoint.empty())
          throw Error("policy " + cfg.policy + " requires judge_endpoint");
        EndpointConfig judge_endpoint;
        judge_endpoint.base_url = cfg.judge_endpoint;
        judge_endpoint.model_name =
            cfg.judge_model.empty() ? "judge" : cfg.judge_model;
        judge_endpoint.timeout_seconds = cfg.timeout_seconds;
        judge = std::make_unique<HttpJudgeClient>(judge_endpoint);
      }
      std::vector<ReflectionLabel> labels;
      labels.reserve(records.size());
      for (const ResponseRecord& r : records) {
        ReflectionLabel label;
        label.problem_id = r.problem_id;
        label.sample_index = r.sample_index;
        const KeywordMatch match = keyword_detect(r.text, pool);
        label.keyword_hit = match.hit;
        label.matched_phrases = match.matched;
        if (judge) label.judge_verdict = llm_judge(r.text, *judge);
        label.policy = policy;
        label.final_verdict =
            cross_validate(label.keyword_hit, label.judge_verdict, policy);
        labels.push_back(std::move(label));
      }
      std::sort(labels.begin(), labels.end(),
                [](const ReflectionLabel& a, const ReflectionLabel& b) {
                  return a.problem_id != b.problem_id
                             ? a.problem_id < b.problem_id
                             : a.sample_index < b.sample_index;
                });
      write_labels_jsonl(labels, paths.labels);
      write_reflection_stats_json(
          reflection_report(labels, read_scores_jsonl(paths.scores)),
          paths.reflection);
    });
  }

  // fit (optional)
  if (cfg.fit) {
    stage("fit", [&] {
      if (fs::exists(paths.fit)) return;
      const auto scored = read_scores_jsonl(paths.scores);
      const auto observations = bin_by_op_count(scored);
      FitDocument doc;
      doc.method = cfg.fit_method;
      doc.fit = cfg.fit_method == "least-squares"
                    ? fit_epsilon_least_squares(observations)
                    : fit_epsilon(observations);
      write_fit_json(doc, paths.fit);
    });
  }

  // report
  stage("report", [&] {
    if (fs::exists(paths.report) && fs::exists(paths.run)) return;
    CheckpointRun run;
    run.label = cfg.label;
    run.stats = read_stats_json(paths.stats);
    if (cfg.reflect) run.reflection = read_reflection_stats_json(paths.reflection);
    if (cfg.fit) run.fit = read_fit_json(paths.fit).fit;
    save_run_json(run, paths.run);
    const std::string document =
        emit_report({run}, report_format_from_string(
                               cfg.format == "md" ? "markdown" : cfg.format));
    std::ofstream out(paths.report);
    if (!out) throw Error("cannot open " + paths.report + " for writing");
    out << document;
  });
}

}  // namespace cotlab
