#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

#include "cotlab/report.hpp"

using namespace cotlab;

namespace {

CheckpointRun make_run(const std::string& label, double avg, double mean_length) {
  CheckpointRun run;
  run.label = label;
  run.stats.n_problems = 400;
  run.stats.k = 4;
  run.stats.avg_at_k = avg;
  run.stats.mean_length = mean_length;
  run.stats.length_mode = LengthMode::provider_tokens;
  return run;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

constexpr const char* kHeader =
    "label,avg_at_k,mean_length,length_mode,reflection_ratio,"
    "reflective_mean_length,nonreflective_mean_length,epsilon_hat";

}  // namespace

TEST_CASE("single run renders header plus one row") {
  const std::string csv = emit_report({make_run("base", 0.75, 640.0)},
                                      ReportFormat::csv);
  const auto lines = split_lines(csv);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == kHeader);
  CHECK(lines[1] == "base,0.75,640,provider_tokens,,,,");
}

TEST_CASE("rows order by numeric label prefix, then lexically") {
  const std::string csv = emit_report(
      {make_run("16k", 0.5, 1.0), make_run("8k", 0.4, 1.0),
       make_run("base", 0.6, 1.0), make_run("128k", 0.7, 1.0)},
      ReportFormat::csv);
  const auto lines = split_lines(csv);
  REQUIRE(lines.size() == 5);
  CHECK(lines[1].rfind("8k,", 0) == 0);
  CHECK(lines[2].rfind("16k,", 0) == 0);
  CHECK(lines[3].rfind("128k,", 0) == 0);
  CHECK(lines[4].rfind("base,", 0) == 0);
}

TEST_CASE("optional fields render as empty cells, not zeros") {
  CheckpointRun with_extras = make_run("8k", 0.3, 3600.0);
  ReflectionStats reflection;
  reflection.n_responses = 1600;
  reflection.n_reflective = 1200;
  reflection.ratio = 0.75;
  reflection.reflective_mean_length = 4000.0;
  reflection.nonreflective_mean_length = 2000.0;
  reflection.length_gap = 2000.0;
  with_extras.reflection = reflection;
  ErrorModelFit fit;
  fit.epsilon_hat = 0.0625;
  with_extras.fit = fit;

  const std::string csv = emit_report({with_extras, make_run("base", 0.6, 640.0)},
                                      ReportFormat::csv);
  const auto lines = split_lines(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[1] == "8k,0.3,3600,provider_tokens,0.75,4000,2000,0.0625");
  CHECK(lines[2] == "base,0.6,640,provider_tokens,,,,");
}

TEST_CASE("duplicate labels and empty runs are rejected") {
  CHECK_THROWS_AS(emit_report({}, ReportFormat::csv), EmptyRuns);
  CHECK_THROWS_AS(
      emit_report({make_run("8k", 0.1, 1.0), make_run("8k", 0.2, 1.0)},
                  ReportFormat::csv),
      DuplicateLabel);
}

TEST_CASE("csv output is byte-deterministic and escapes labels") {
  const std::vector<CheckpointRun> runs{make_run("a,b", 0.123456789, 12.5),
                                        make_run("plain", 0.5, 9.0)};
  const std::string once = emit_report(runs, ReportFormat::csv);
  const std::string twice = emit_report(runs, ReportFormat::csv);
  CHECK(once == twice);
  CHECK(once.find("\"a,b\"") != std::string::npos);
}

TEST_CASE("json mirrors the csv fields") {
  CheckpointRun run = make_run("32k", 0.66, 4000.0);
  ErrorModelFit fit;
  fit.epsilon_hat = 0.01;
  run.fit = fit;
  const std::string text = emit_report({run}, ReportFormat::json);
  const nlohmann::json j = nlohmann::json::parse(text);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  CHECK(j[0].at("label") == "32k");
  CHECK(j[0].at("avg_at_k") == 0.66);
  CHECK(j[0].at("mean_length") == 4000.0);
  CHECK(j[0].at("epsilon_hat") == 0.01);
  CHECK_FALSE(j[0].contains("reflection_ratio"));  // absent, not zero
}

TEST_CASE("markdown renders one table") {
  const std::string md = emit_report(
      {make_run("8k", 0.25, 3600.0), make_run("64k", 0.55, 2400.0)},
      ReportFormat::markdown);
  const auto lines = split_lines(md);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].find("| label |") == 0);
  CHECK(lines[1].find("| --- |") == 0);
  CHECK(lines[2].find("| 8k |") == 0);
  CHECK(lines[3].find("| 64k |") == 0);
}

TEST_CASE("run documents round-trip") {
  CheckpointRun run = make_run("64k", 0.5125, 2455.75);
  run.stats.per_problem = {{"p-0000", 0.75}, {"p-0001", 0.25}};
  ReflectionStats reflection;
  reflection.n_responses = 8;
  reflection.n_reflective = 2;
  reflection.ratio = 0.25;
  reflection.nonreflective_mean_length = 100.0;
  run.reflection = reflection;
  ErrorModelFit fit;
  fit.epsilon_hat = 0.05;
  fit.log_likelihood = -1234.5;
  fit.n_observations = 1600;
  fit.confidence_low = 0.04;
  fit.confidence_high = 0.06;
  fit.deviance = 9.5;
  fit.deviance_dof = 10;
  run.fit = fit;

  const std::string path = "test_run_roundtrip.json";
  save_run_json(run, path);
  const CheckpointRun back = load_run_json(path);
  CHECK(back.label == run.label);
  CHECK(back.stats.avg_at_k == run.stats.avg_at_k);
  CHECK(back.stats.per_problem == run.stats.per_problem);
  REQUIRE(back.reflection.has_value());
  CHECK(back.reflection->ratio == 0.25);
  CHECK_FALSE(back.reflection->reflective_mean_length.has_value());
  REQUIRE(back.fit.has_value());
  CHECK(back.fit->epsilon_hat == 0.05);
  CHECK(back.fit->deviance_dof == 10);
  std::remove(path.c_str());

  const std::string fit_path = "test_fit_roundtrip.json";
  write_fit_json({fit, "mle", "op_count", "problem_op_count"}, fit_path);
  const FitDocument doc = read_fit_json(fit_path);
  CHECK(doc.fit.epsilon_hat == 0.05);
  CHECK(doc.method == "mle");
  CHECK(doc.bin_by == "op_count");
  CHECK(doc.length_source == "problem_op_count");
  std::remove(fit_path.c_str());
}
