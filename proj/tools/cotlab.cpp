// cotlab - synthetic arithmetic benchmarking and error-accumulation analysis
// for chat-completions models.
//
// Subcommands: gen, sample, simulate, score, reflect, fit, report, pipeline.
// Exit codes: 0 success, 1 usage error, 2 stage failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "cotlab/generator.hpp"
#include "cotlab/inference.hpp"
#include "cotlab/jsonl.hpp"
#include "cotlab/pipeline.hpp"
#include "cotlab/reflection.hpp"
#include "cotlab/report.hpp"
#include "cotlab/responder.hpp"
#include "cotlab/rng.hpp"

namespace {

using namespace cotlab;

struct SortByKey {
  template <typename T>
  bool operator()(const T& a, const T& b) const {
    return a.problem_id != b.problem_id ? a.problem_id < b.problem_id
                                        : a.sample_index < b.sample_index;
  }
};

int cmd_gen(int n, std::uint64_t seed, const std::string& ops,
            const std::string& operands, std::int64_t cap, bool no_negative,
            const std::string& out) {
  GenerationConfig config;
  const auto [op_lo, op_hi] = parse_range(ops);
  const auto [operand_lo, operand_hi] = parse_range(operands);
  config.op_count_min = static_cast<int>(op_lo);
  config.op_count_max = static_cast<int>(op_hi);
  config.operand_min = operand_lo;
  config.operand_max = operand_hi;
  config.magnitude_cap = cap;
  config.allow_negative_intermediates = !no_negative;
  config.seed = seed;
  write_problems_jsonl(generate_suite(config, n), out);
  std::cout << "wrote " << n << " problems to " << out << "\n";
  return 0;
}

int cmd_sample(const std::string& problems_path, const SamplingConfig& sampling,
               const EndpointConfig& endpoint, const std::string& out) {
  const auto problems = read_problems_jsonl(problems_path);
  RecordStore store(out);
  const RunSummary summary = sample_completions(problems, sampling, endpoint, store);
  std::cout << "requested " << summary.requested << ", completed "
            << summary.completed << ", skipped " << summary.skipped
            << ", failed " << summary.failed << "\n";
  for (const std::string& f : summary.failures) std::cerr << "  " << f << "\n";
  return summary.failed == 0 ? 0 : 2;
}

int cmd_simulate(const std::string& problems_path, double epsilon, int k,
                 std::uint64_t seed, double reflection_rate,
                 const std::string& out) {
  const auto problems = read_problems_jsonl(problems_path);
  RecordStore store(out);
  store.truncate_partial_tail();
  const RunManifest manifest = store.scan();
  ResponderTemplate tmpl;
  tmpl.reflection_rate = reflection_rate;
  char label[64];
  std::snprintf(label, sizeof(label), "synthetic(eps=%g)", epsilon);
  tmpl.model_label = label;
  long long written = 0;
  for (const ProblemInstance& p : problems) {
    for (int j = 0; j < k; ++j) {
      if (manifest.completed.count({p.id, j}) != 0) continue;
      const std::uint64_t response_seed =
          derive_stream_seed(mix_seed(seed, fnv64(p.id)),
                             static_cast<std::uint64_t>(j));
      store.append(synthetic_respond(p, epsilon, response_seed, tmpl, j));
      ++written;
    }
  }
  std::cout << "wrote " << written << " synthetic responses to " << out << "\n";
  return 0;
}

int cmd_score(const std::string& problems_path, const std::string& responses_path,
              int k, const std::string& answer_mode, const std::string& out,
              const std::string& stats_path) {
  const auto records = read_records_jsonl(responses_path);
  const auto truth = load_ground_truth(problems_path,
                                       answer_mode == "exact-string"
                                           ? AnswerMode::exact_string
                                           : AnswerMode::integer);
  auto scored = score_records(records, truth);
  std::sort(scored.begin(), scored.end(), SortByKey{});
  write_scores_jsonl(scored, out);
  const BenchmarkStats stats = aggregate_avg_at_k(scored, k);
  if (!stats_path.empty()) write_stats_json(stats, stats_path);
  std::cout << "avg@" << k << " = " << stats.avg_at_k << " over "
            << stats.n_problems << " problems\n";
  return 0;
}

int cmd_reflect(const std::string& responses_path, const std::string& policy_name,
                const std::string& judge_endpoint, const std::string& judge_model,
                const std::string& keywords_file, const std::string& scores_path,
                const std::string& out, const std::string& stats_path) {
  const auto records = read_records_jsonl(responses_path);
  const KeywordPool pool = keywords_file.empty()
                               ? KeywordPool::default_pool()
                               : KeywordPool::from_file(keywords_file);
  const ReflectionPolicy policy = reflection_policy_from_string(policy_name);
  std::unique_ptr<HttpJudgeClient> judge;
  if (policy != ReflectionPolicy::keyword_only) {
    if (judge_endpoint.empty())
      throw ConfigInvalid("policy " + policy_name + " requires --judge-endpoint");
    EndpointConfig endpoint;
    endpoint.base_url = judge_endpoint;
    endpoint.model_name = judge_model.empty() ? "judge" : judge_model;
    judge = std::make_unique<HttpJudgeClient>(endpoint);
  }
  std::vector<ReflectionLabel> labels;
  labels.reserve(records.size());
  long long reflective = 0;
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
    reflective += label.final_verdict ? 1 : 0;
    labels.push_back(std::move(label));
  }
  std::sort(labels.begin(), labels.end(), SortByKey{});
  write_labels_jsonl(labels, out);
  if (!scores_path.empty() && !stats_path.empty())
    write_reflection_stats_json(
        reflection_report(labels, read_scores_jsonl(scores_path)), stats_path);
  std::cout << reflective << " of " << labels.size()
            << " responses labeled reflective\n";
  return 0;
}

int cmd_fit(const std::string& scores_path, const std::string& problems_path,
            const std::string& bin_by, const std::string& method,
            const std::string& out) {
  if (bin_by != "op_count")
    throw ConfigInvalid("only --bin-by op_count is supported");
  auto scored = read_scores_jsonl(scores_path);
  if (!problems_path.empty()) {
    const auto truth = load_ground_truth(problems_path, AnswerMode::integer);
    for (ScoredResponse& s : scored) {
      if (s.op_count) continue;
      const auto it = truth.find(s.problem_id);
      if (it != truth.end()) s.op_count = it->second.op_count;
    }
  }
  const auto observations = bin_by_op_count(scored);
  FitDocument doc;
  doc.method = method;
  doc.fit = method == "least-squares" ? fit_epsilon_least_squares(observations)
                                      : fit_epsilon(observations);
  write_fit_json(doc, out);
  std::cout << "epsilon_hat = " << doc.fit.epsilon_hat << " (95% CI ["
            << doc.fit.confidence_low << ", " << doc.fit.confidence_high
            << "], " << doc.fit.n_observations << " trials)\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& run_paths,
               const std::string& format, const std::string& out) {
  std::vector<CheckpointRun> runs;
  runs.reserve(run_paths.size());
  for (const std::string& path : run_paths) runs.push_back(load_run_json(path));
  const std::string document =
      emit_report(runs, report_format_from_string(format));
  if (out.empty() || out == "-") {
    std::cout << document;
  } else {
    std::ofstream file(out);
    if (!file) throw Error("cannot open " + out + " for writing");
    file << document;
    std::cout << "wrote report to " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic arithmetic benchmarking and cumulative-error "
               "analysis for chat-completions models"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a problem suite");
  int gen_n = 400;
  std::uint64_t gen_seed = 0;
  std::string gen_ops = "5..15", gen_operands = "1..100", gen_out = "problems.jsonl";
  std::int64_t gen_cap = 1'000'000;
  bool gen_no_negative = false;
  gen->add_option("--n", gen_n, "Number of problems");
  gen->add_option("--seed", gen_seed, "Suite seed");
  gen->add_option("--ops", gen_ops, "Operation count range, e.g. 5..15");
  gen->add_option("--operands", gen_operands, "Operand range, e.g. 1..100");
  gen->add_option("--magnitude-cap", gen_cap, "Intermediate magnitude cap");
  gen->add_flag("--no-negative-intermediates", gen_no_negative,
                "Keep every intermediate nonnegative");
  gen->add_option("--out", gen_out, "Output JSONL path");

  // sample
  auto* sample = app.add_subcommand("sample", "Sample k completions per problem");
  std::string sample_problems, sample_endpoint, sample_model, sample_out =
      "responses.jsonl";
  std::string sample_auth_env, sample_system, sample_template;
  SamplingConfig sampling;
  EndpointConfig endpoint;
  sample->add_option("--problems", sample_problems, "Problems JSONL")->required();
  sample->add_option("--k", sampling.k, "Samples per problem");
  sample->add_option("--temperature", sampling.temperature, "Sampling temperature");
  sample->add_option("--top-p", sampling.top_p, "Nucleus sampling mass");
  sample->add_option("--max-tokens", sampling.max_tokens, "Generation cap");
  sample->add_option("--endpoint", sample_endpoint, "Base URL, e.g. http://host/v1")
      ->required();
  sample->add_option("--model", sample_model, "Model name")->required();
  sample->add_option("--auth-env", sample_auth_env,
                     "Env var holding the bearer token");
  sample->add_option("--system-prompt", sample_system, "Optional system message");
  sample->add_option("--template", sample_template,
                     "User message template with a {problem} slot");
  bool sample_greedy = false;
  sample->add_flag("--greedy", sample_greedy,
                   "Greedy decoding: temperature 0, top-p 1 (non-protocol; "
                   "the evaluation protocol samples at 0.6/0.95)");
  sample->add_option("--concurrency", endpoint.max_concurrency,
                     "Max in-flight requests");
  sample->add_option("--timeout", endpoint.timeout_seconds, "Request timeout (s)");
  sample->add_option("--retries", endpoint.retry_max_attempts,
                     "Attempts per request");
  sample->add_option("--backoff", endpoint.retry_base_backoff_seconds,
                     "Base retry backoff (s)");
  sample->add_option("--out", sample_out, "Response store JSONL");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Produce synthetic noisy responses at a planted epsilon");
  std::string sim_problems, sim_out = "responses.jsonl";
  double sim_epsilon = 0.05, sim_reflection_rate = 0.0;
  int sim_k = 4;
  std::uint64_t sim_seed = 0;
  simulate->add_option("--problems", sim_problems, "Problems JSONL")->required();
  simulate->add_option("--epsilon", sim_epsilon, "Per-step error rate")->required();
  simulate->add_option("--k", sim_k, "Samples per problem");
  simulate->add_option("--seed", sim_seed, "Responder seed");
  simulate->add_option("--reflection-rate", sim_reflection_rate,
                       "Per-step probability of a verification aside");
  simulate->add_option("--out", sim_out, "Response store JSONL");

  // score
  auto* score = app.add_subcommand("score", "Grade responses against ground truth");
  std::string score_problems, score_responses, score_out = "scores.jsonl";
  std::string score_stats = "stats.json", score_answer_mode = "integer";
  int score_k = 4;
  score->add_option("--problems", score_problems, "Problems JSONL")->required();
  score->add_option("--responses", score_responses, "Responses JSONL")->required();
  score->add_option("--k", score_k, "Samples per problem");
  score->add_option("--answer-mode", score_answer_mode,
                    "integer or exact-string equality")
      ->check(CLI::IsMember({"integer", "exact-string"}));
  score->add_option("--out", score_out, "Scored JSONL path");
  score->add_option("--stats", score_stats, "Benchmark stats JSON path");

  // reflect
  auto* reflect = app.add_subcommand("reflect", "Label reflective responses");
  std::string reflect_responses, reflect_policy = "conjunction";
  std::string reflect_judge, reflect_judge_model, reflect_keywords;
  std::string reflect_scores, reflect_out = "labels.jsonl", reflect_stats;
  reflect->add_option("--responses", reflect_responses, "Responses JSONL")
      ->required();
  reflect->add_option("--policy", reflect_policy,
                      "conjunction, disjunction or keyword_only")
      ->check(CLI::IsMember({"conjunction", "disjunction", "keyword_only"}));
  reflect->add_option("--judge-endpoint", reflect_judge,
                      "Chat-completions URL for the judge");
  reflect->add_option("--judge-model", reflect_judge_model, "Judge model name");
  reflect->add_option("--keywords", reflect_keywords,
                      "Keyword pool file, one phrase per line");
  reflect->add_option("--scores", reflect_scores,
                      "Scored JSONL (enables --stats report)");
  reflect->add_option("--out", reflect_out, "Labels JSONL path");
  reflect->add_option("--stats", reflect_stats, "Reflection stats JSON path");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the per-step error rate");
  std::string fit_scores, fit_problems, fit_bin = "op_count";
  std::string fit_method = "mle", fit_out = "fit.json";
  fit->add_option("--scores", fit_scores, "Scored JSONL")->required();
  fit->add_option("--problems", fit_problems,
                  "Problems JSONL (joins op_count when scores lack it)");
  fit->add_option("--bin-by", fit_bin, "Binning key (op_count)");
  fit->add_option("--method", fit_method, "mle or least-squares")
      ->check(CLI::IsMember({"mle", "least-squares"}));
  fit->add_option("--out", fit_out, "Fit JSON path");

  // report
  auto* report = app.add_subcommand("report", "Render checkpoint runs");
  std::vector<std::string> report_runs;
  std::string report_format = "csv", report_out;
  report->add_option("--runs", report_runs, "run.json files")
      ->required()
      ->expected(-1);
  report->add_option("--format", report_format, "csv, json or markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown", "md"}));
  report->add_option("--out", report_out, "Output path (default stdout)");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run the full pipeline");
  std::string pipeline_config;
  std::vector<std::string> pipeline_sets;
  pipeline->add_option("--config", pipeline_config, "Flat JSON config file");
  pipeline->add_option("--set", pipeline_sets,
                       "key=value overrides (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_n, gen_seed, gen_ops, gen_operands, gen_cap,
                     gen_no_negative, gen_out);
    if (sample->parsed()) {
      if (!sample_system.empty()) sampling.system_prompt = sample_system;
      if (!sample_template.empty()) sampling.user_template = sample_template;
      if (sample_greedy) {
        sampling.temperature = 0.0;
        sampling.top_p = 1.0;
        std::cerr << "cotlab: --greedy is not the evaluation protocol; "
                     "results are not comparable to sampled runs\n";
      }
      endpoint.base_url = sample_endpoint;
      endpoint.model_name = sample_model;
      endpoint.auth_token_env = sample_auth_env;
      return cmd_sample(sample_problems, sampling, endpoint, sample_out);
    }
    if (simulate->parsed())
      return cmd_simulate(sim_problems, sim_epsilon, sim_k, sim_seed,
                          sim_reflection_rate, sim_out);
    if (score->parsed())
      return cmd_score(score_problems, score_responses, score_k,
                       score_answer_mode, score_out, score_stats);
    if (reflect->parsed())
      return cmd_reflect(reflect_responses, reflect_policy, reflect_judge,
                         reflect_judge_model, reflect_keywords, reflect_scores,
                         reflect_out, reflect_stats);
    if (fit->parsed())
      return cmd_fit(fit_scores, fit_problems, fit_bin, fit_method, fit_out);
    if (report->parsed())
      return cmd_report(report_runs, report_format, report_out);
    if (pipeline->parsed()) {
      PipelineConfig config;
      if (!pipeline_config.empty())
        config = PipelineConfig::from_json_file(pipeline_config);
      for (const std::string& kv : pipeline_sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw ConfigInvalid("--set expects key=value, got: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        // Values parse as JSON when possible (numbers, booleans), else as
        // plain strings.
        nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
        config.apply_override(key,
                              parsed.is_discarded() ? nlohmann::json(value) : parsed);
      }
      run_pipeline(config);
      std::cout << "pipeline complete; outputs in " << config.out_dir << "\n";
      return 0;
    }
  } catch (const cotlab::StageError& e) {
    std::cerr << "cotlab: " << e.what() << "\n";
    return 2;
  } catch (const cotlab::ConfigInvalid& e) {
    std::cerr << "cotlab: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "cotlab: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
