#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cotlab/error_model.hpp"
#include "cotlab/generator.hpp"
#include "cotlab/inference.hpp"
#include "cotlab/jsonl.hpp"
#include "cotlab/pipeline.hpp"
#include "cotlab/report.hpp"
#include "mock_endpoint.hpp"

using namespace cotlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  explicit TempDir(const std::string& name)
      : path(fs::current_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& file = "") const {
    return file.empty() ? path.string() : (path / file).string();
  }
  fs::path path;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineConfig synthetic_config(const TempDir& dir) {
  PipelineConfig cfg;
  cfg.out_dir = dir.str();
  cfg.label = "8k";
  cfg.n = 60;
  cfg.seed = 31415;
  cfg.k = 2;
  cfg.mode = "synthetic";
  cfg.epsilon = 0.1;
  cfg.reflection_rate = 0.5;
  cfg.reflect = true;
  cfg.policy = "keyword_only";
  cfg.fit = true;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(COTLAB_CLI_PATH) + " " + args +
                              " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("parse_range") {
  CHECK(parse_range("5..15") == std::pair<std::int64_t, std::int64_t>{5, 15});
  CHECK(parse_range("1..100") == std::pair<std::int64_t, std::int64_t>{1, 100});
  CHECK_THROWS_AS(parse_range("515"), ConfigInvalid);
  CHECK_THROWS_AS(parse_range("a..b"), ConfigInvalid);
}

TEST_CASE("bin_by_op_count groups accuracy by length") {
  std::vector<ScoredResponse> scored;
  for (int i = 0; i < 10; ++i) {
    ScoredResponse s;
    s.problem_id = "p" + std::to_string(i);
    s.correct = i % 2 == 0;
    s.op_count = i < 6 ? 5 : 9;
    scored.push_back(std::move(s));
  }
  const auto bins = bin_by_op_count(scored);
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].length == 5);
  CHECK(bins[0].trials == 6);
  CHECK(bins[0].successes == 3);
  CHECK(bins[1].length == 9);
  CHECK(bins[1].trials == 4);

  scored[0].op_count.reset();
  CHECK_THROWS_AS(bin_by_op_count(scored), Error);
}

TEST_CASE("config files load with overrides and reject unknown keys") {
  TempDir dir("pipe_cfg");
  const std::string path = dir.str("config.json");
  {
    std::ofstream out(path);
    out << R"({"n": 25, "epsilon": 0.2, "mode": "synthetic", "label": "x"})";
  }
  PipelineConfig cfg = PipelineConfig::from_json_file(path);
  CHECK(cfg.n == 25);
  CHECK(cfg.epsilon == 0.2);
  CHECK(cfg.label == "x");
  cfg.apply_override("k", 8);
  CHECK(cfg.k == 8);
  CHECK_THROWS_AS(cfg.apply_override("no_such_key", 1), ConfigInvalid);

  {
    std::ofstream out(path);
    out << R"({"bogus_key": true})";
  }
  CHECK_THROWS_AS(PipelineConfig::from_json_file(path), ConfigInvalid);
}

TEST_CASE("synthetic pipeline runs end to end") {
  TempDir dir("pipe_e2e");
  const PipelineConfig cfg = synthetic_config(dir);
  run_pipeline(cfg);

  for (const char* file : {"problems.jsonl", "responses.jsonl", "scores.jsonl",
                           "stats.json", "labels.jsonl", "reflection.json",
                           "fit.json", "run.json", "report.csv"})
    CHECK(fs::exists(dir.str(file)));

  CHECK(count_lines(dir.str("problems.jsonl")) == 60);
  CHECK(count_lines(dir.str("responses.jsonl")) == 120);
  CHECK(count_lines(dir.str("scores.jsonl")) == 120);
  CHECK(count_lines(dir.str("labels.jsonl")) == 120);

  // Measured accuracy sits near the model's prediction for the planted rate.
  const BenchmarkStats stats = read_stats_json(dir.str("stats.json"));
  std::map<int, long long> counts;
  for (const auto& p : read_problems_jsonl(dir.str("problems.jsonl")))
    ++counts[p.op_count];
  const double predicted =
      predict_accuracy(cfg.epsilon, LengthDistribution::from_counts(counts));
  CHECK(stats.avg_at_k > predicted - 0.15);
  CHECK(stats.avg_at_k < predicted + 0.15);

  // The fitted rate lands in the neighborhood of the planted one.
  const FitDocument fit = read_fit_json(dir.str("fit.json"));
  CHECK(fit.fit.epsilon_hat > 0.02);
  CHECK(fit.fit.epsilon_hat < 0.25);

  // Report carries the single labeled row.
  const std::string csv = slurp(dir.str("report.csv"));
  CHECK(csv.find("label,avg_at_k") == 0);
  CHECK(csv.find("\n8k,") != std::string::npos);
}

TEST_CASE("a finished pipeline reruns without new work") {
  TempDir dir("pipe_rerun");
  const PipelineConfig cfg = synthetic_config(dir);
  run_pipeline(cfg);

  std::map<std::string, std::string> before;
  for (const auto& entry : fs::directory_iterator(dir.str()))
    before[entry.path().filename().string()] = slurp(entry.path().string());

  run_pipeline(cfg);
  for (const auto& entry : fs::directory_iterator(dir.str())) {
    const std::string name = entry.path().filename().string();
    INFO("file changed on rerun: " << name);
    CHECK(slurp(entry.path().string()) == before.at(name));
  }
}

TEST_CASE("an interrupted synthetic run resumes deterministically") {
  TempDir dir("pipe_resume");
  const PipelineConfig cfg = synthetic_config(dir);
  run_pipeline(cfg);
  const std::string scores_before = slurp(dir.str("scores.jsonl"));
  const std::string stats_before = slurp(dir.str("stats.json"));

  // Chop the response store mid-stream (plus a torn half line) and clear the
  // downstream artifacts.
  {
    const std::string whole = slurp(dir.str("responses.jsonl"));
    std::string cut;
    std::size_t lines = 0, pos = 0;
    while (lines < 47 && pos < whole.size()) {
      if (whole[pos] == '\n') ++lines;
      cut.push_back(whole[pos++]);
    }
    cut += "{\"problem_id\":\"torn";
    std::ofstream out(dir.str("responses.jsonl"), std::ios::trunc);
    out << cut;
  }
  for (const char* file : {"scores.jsonl", "stats.json", "labels.jsonl",
                           "reflection.json", "fit.json", "run.json",
                           "report.csv"})
    fs::remove(dir.str(file));

  run_pipeline(cfg);
  CHECK(count_lines(dir.str("responses.jsonl")) == 120);
  // Scoring is a deterministic fold over a deterministic record set.
  CHECK(slurp(dir.str("scores.jsonl")) == scores_before);
  CHECK(slurp(dir.str("stats.json")) == stats_before);
}

TEST_CASE("endpoint mode drives the sampling client end to end") {
  mock_endpoint::MockServer server;
  TempDir dir("pipe_endpoint");
  PipelineConfig cfg;
  cfg.out_dir = dir.str();
  cfg.label = "mock";
  cfg.n = 12;
  cfg.seed = 99;
  cfg.k = 2;
  cfg.mode = "endpoint";
  cfg.endpoint = server.base_url();
  cfg.model = "mock-model";
  cfg.concurrency = 2;
  cfg.fit = false;  // the mock answers are junk; a fit would be degenerate
  run_pipeline(cfg);

  CHECK(count_lines(dir.str("responses.jsonl")) == 24);
  CHECK(server.total_requests.load() == 24);
  CHECK(server.max_in_flight.load() <= 2);
  const BenchmarkStats stats = read_stats_json(dir.str("stats.json"));
  CHECK(stats.n_problems == 12);
  CHECK(stats.length_mode == LengthMode::provider_tokens);

  // Endpoint mode without an endpoint is a config failure.
  PipelineConfig bad = cfg;
  bad.endpoint.clear();
  CHECK_THROWS_AS(run_pipeline(bad), StageError);
}

TEST_CASE("a missing problems file surfaces at the score stage") {
  TempDir dir("pipe_missing");
  PipelineConfig cfg = synthetic_config(dir);
  run_pipeline(cfg);

  // Same store, but ground truth now points at a file that does not exist.
  PipelineConfig broken = cfg;
  broken.problems_file = dir.str("not_there.jsonl");
  fs::remove(dir.str("scores.jsonl"));
  fs::remove(dir.str("stats.json"));
  try {
    run_pipeline(broken);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "score");
    CHECK(std::string(e.what()).find("score") != std::string::npos);
  }
}

TEST_CASE("cli subcommands compose the same pipeline") {
  TempDir dir("pipe_cli");
  const std::string problems = dir.str("problems.jsonl");
  const std::string responses = dir.str("responses.jsonl");
  const std::string scores = dir.str("scores.jsonl");
  const std::string stats = dir.str("stats.json");
  const std::string labels = dir.str("labels.jsonl");
  const std::string fit = dir.str("fit.json");
  const std::string run = dir.str("run.json");

  CHECK(run_cli("gen --n 30 --seed 5 --ops 5..15 --operands 1..100 --out " +
                problems) == 0);
  CHECK(count_lines(problems) == 30);
  CHECK(run_cli("simulate --problems " + problems +
                " --epsilon 0.05 --k 4 --seed 9 --out " + responses) == 0);
  CHECK(count_lines(responses) == 120);
  CHECK(run_cli("score --problems " + problems + " --responses " + responses +
                " --k 4 --out " + scores + " --stats " + stats) == 0);
  CHECK(run_cli("reflect --responses " + responses +
                " --policy keyword_only --scores " + scores + " --out " +
                labels + " --stats " + dir.str("reflection.json")) == 0);
  CHECK(run_cli("fit --scores " + scores + " --bin-by op_count --out " + fit) ==
        0);

  // Assemble a run document from the stage outputs and render it.
  CheckpointRun checkpoint;
  checkpoint.label = "cli";
  checkpoint.stats = read_stats_json(stats);
  checkpoint.fit = read_fit_json(fit).fit;
  save_run_json(checkpoint, run);
  CHECK(run_cli("report --runs " + run + " --format csv --out " +
                dir.str("report.csv")) == 0);
  CHECK(slurp(dir.str("report.csv")).find("\ncli,") != std::string::npos);

  // Usage errors exit 1; stage failures exit 2.
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("gen --no-such-flag") == 1);
  CHECK(run_cli("score --problems " + dir.str("nope.jsonl") + " --responses " +
                responses + " --k 4 --out " + scores + " --stats " + stats) ==
        2);
}

TEST_CASE("cli pipeline subcommand honors config plus --set overrides") {
  TempDir dir("pipe_cli_cfg");
  const std::string config_path = dir.str("config.json");
  {
    std::ofstream out(config_path);
    out << nlohmann::json{{"out_dir", dir.str()},
                          {"n", 20},
                          {"seed", 77},
                          {"k", 2},
                          {"mode", "synthetic"},
                          {"epsilon", 0.3},
                          {"label", "cfg"},
                          {"fit", false}}
               .dump();
  }
  CHECK(run_cli("pipeline --config " + config_path + " --set n=25") == 0);
  CHECK(count_lines(dir.str("problems.jsonl")) == 25);  // override beat file
  CHECK(count_lines(dir.str("responses.jsonl")) == 50);
  CHECK(fs::exists(dir.str("report.csv")));
  CHECK_FALSE(fs::exists(dir.str("fit.json")));
}
