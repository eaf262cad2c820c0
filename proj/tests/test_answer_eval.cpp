#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/rng.hpp"
#include "fixtures.hpp"

using namespace cotlab;

namespace {

ResponseRecord make_record(const std::string& id, int index, std::string text,
                           FinishReason reason = FinishReason::stop) {
  ResponseRecord r;
  r.problem_id = id;
  r.sample_index = index;
  r.text = std::move(text);
  r.finish_reason = reason;
  r.model_label = "fixture";
  return r;
}

ScoredResponse make_scored(const std::string& id, int index, bool correct,
                           long long chars = 100) {
  ScoredResponse s;
  s.problem_id = id;
  s.sample_index = index;
  s.correct = correct;
  s.length_chars = chars;
  return s;
}

// Deterministic in-place shuffle for permutation-invariance checks.
template <typename T>
void shuffle(std::vector<T>& values, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = values.size(); i > 1; --i)
    std::swap(values[i - 1], values[rng.below(i)]);
}

}  // namespace

TEST_CASE("extraction on the three solve styles") {
  CHECK(extract_final_answer(fixtures::kCleanSolve) == std::string("11440"));
  CHECK(extract_final_answer(fixtures::kDerailedSolve) == std::string("11430"));
  CHECK(extract_final_answer(fixtures::kRecoveredSolve) == std::string("11440"));
}

TEST_CASE("extraction rules") {
  CHECK_FALSE(extract_final_answer("").has_value());
  CHECK_FALSE(extract_final_answer("no answer here").has_value());

  // Last well-balanced box wins.
  CHECK(extract_final_answer("\\boxed{1} then \\boxed{2}") == std::string("2"));
  // Nested braces are matched, not cut at the first closing brace.
  CHECK(extract_final_answer("\\boxed{\\frac{1}{2}}") ==
        std::string("\\frac{1}{2}"));
  // An unbalanced (truncated) box falls back to an earlier balanced one.
  CHECK(extract_final_answer("\\boxed{5} ... \\boxed{12") == std::string("5"));
  CHECK_FALSE(extract_final_answer("\\boxed{12").has_value());

  // Fallback: last "final answer" line with a number.
  CHECK(extract_final_answer("The final answer is 42") == std::string("42"));
  CHECK(extract_final_answer("Final Answer: 1,234.") == std::string("1,234"));
  CHECK(extract_final_answer("final answer is -7\nfinal answer is -9") ==
        std::string("-9"));
  CHECK_FALSE(extract_final_answer("The final answer is unclear").has_value());
  // Boxed beats the marker even when the marker comes later.
  CHECK(extract_final_answer("\\boxed{3}\nfinal answer is 4") ==
        std::string("3"));
}

TEST_CASE("normalization") {
  CHECK(normalize_answer("11,440") == 11440);
  CHECK(normalize_answer(" 42 ") == 42);
  CHECK(normalize_answer("+7") == 7);
  CHECK(normalize_answer("-13") == -13);
  CHECK(normalize_answer("$13$") == 13);
  CHECK(normalize_answer("\\(9\\)") == 9);
  CHECK(normalize_answer("\\[10\\]") == 10);
  CHECK(normalize_answer("$ 1,000 $") == 1000);
  CHECK(normalize_answer("-0") == 0);
  CHECK_FALSE(normalize_answer("").has_value());
  CHECK_FALSE(normalize_answer("abc").has_value());
  CHECK_FALSE(normalize_answer("12.5").has_value());
  CHECK_FALSE(normalize_answer("1 2").has_value());
  CHECK_FALSE(normalize_answer("\\frac{1}{2}").has_value());
  CHECK_FALSE(normalize_answer("99999999999999999999999").has_value());
}

TEST_CASE("scoring the three solve styles against truth 11440") {
  const auto clean = score_response(make_record("p", 0, fixtures::kCleanSolve), 11440);
  CHECK(clean.correct);
  CHECK(clean.extracted == std::string("11440"));
  CHECK_FALSE(clean.truncated);

  const auto derailed =
      score_response(make_record("p", 1, fixtures::kDerailedSolve), 11440);
  CHECK_FALSE(derailed.correct);
  CHECK(derailed.extracted == std::string("11430"));

  const auto recovered =
      score_response(make_record("p", 2, fixtures::kRecoveredSolve), 11440);
  CHECK(recovered.correct);
}

TEST_CASE("scoring edge cases") {
  // No extraction scores incorrect, not an error.
  const auto none = score_response(make_record("p", 0, "I give up."), 5);
  CHECK_FALSE(none.correct);
  CHECK_FALSE(none.extracted.has_value());

  // Non-integer extraction on the integer benchmark scores incorrect.
  const auto frac = score_response(make_record("p", 0, "\\boxed{\\frac{1}{2}}"), 5);
  CHECK_FALSE(frac.correct);
  CHECK(frac.extracted.has_value());

  // Truncation is flagged; a boxed answer before the cut still counts.
  const auto cut = score_response(
      make_record("p", 0, "\\boxed{5} and then it rambles on", FinishReason::length),
      5);
  CHECK(cut.truncated);
  CHECK(cut.correct);

  // Deterministic and idempotent.
  const auto again = score_response(
      make_record("p", 0, "\\boxed{5} and then it rambles on", FinishReason::length),
      5);
  CHECK(again == cut);

  // exact-string mode.
  CHECK(score_response_exact(make_record("p", 0, "\\boxed{ok then}"), "ok then")
            .correct);
  CHECK_FALSE(
      score_response_exact(make_record("p", 0, "\\boxed{ok}"), "ok then").correct);
}

TEST_CASE("avg@k aggregation") {
  std::vector<ScoredResponse> scored{
      make_scored("p1", 0, true), make_scored("p1", 1, false),
      make_scored("p1", 2, true), make_scored("p1", 3, true)};
  const BenchmarkStats stats = aggregate_avg_at_k(scored, 4);
  CHECK(stats.avg_at_k == 0.75);
  CHECK(stats.n_problems == 1);
  CHECK(stats.per_problem.at(0).second == 0.75);

  // All correct.
  std::vector<ScoredResponse> perfect;
  for (int p = 0; p < 3; ++p)
    for (int j = 0; j < 2; ++j)
      perfect.push_back(make_scored("q" + std::to_string(p), j, true));
  CHECK(aggregate_avg_at_k(perfect, 2).avg_at_k == 1.0);
}

TEST_CASE("avg@k is invariant under permutation") {
  std::vector<ScoredResponse> scored;
  SplitMix64 rng(404);
  for (int p = 0; p < 40; ++p)
    for (int j = 0; j < 4; ++j)
      scored.push_back(make_scored("p" + std::to_string(p), j, rng.below(2) == 0,
                                   static_cast<long long>(rng.below(1000))));
  const BenchmarkStats baseline = aggregate_avg_at_k(scored, 4);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto permuted = scored;
    shuffle(permuted, s);
    const BenchmarkStats stats = aggregate_avg_at_k(permuted, 4);
    CHECK(stats.avg_at_k == baseline.avg_at_k);
    CHECK(stats.per_problem == baseline.per_problem);
    CHECK(stats.mean_length == baseline.mean_length);
  }
}

TEST_CASE("avg@k validates completeness and distinctness") {
  std::vector<ScoredResponse> scored{make_scored("p1", 0, true),
                                     make_scored("p1", 1, true),
                                     make_scored("p2", 0, true)};
  CHECK_THROWS_AS(aggregate_avg_at_k(scored, 2), IncompleteRun);
  try {
    aggregate_avg_at_k(scored, 2);
  } catch (const IncompleteRun& e) {
    REQUIRE(e.offending_ids.size() == 1);
    CHECK(e.offending_ids[0] == "p2");
  }

  // Duplicate sample indices are not a complete run either.
  std::vector<ScoredResponse> dup{make_scored("p1", 0, true),
                                  make_scored("p1", 0, true)};
  CHECK_THROWS_AS(aggregate_avg_at_k(dup, 2), IncompleteRun);

  // Indices must be exactly 0..k-1, not merely k distinct values.
  std::vector<ScoredResponse> shifted{make_scored("p1", 1, true),
                                      make_scored("p1", 2, true)};
  CHECK_THROWS_AS(aggregate_avg_at_k(shifted, 2), IncompleteRun);
}

TEST_CASE("length statistics") {
  std::vector<ResponseRecord> records{make_record("a", 0, "alpha beta gamma"),
                                      make_record("b", 0, "one two")};
  records[0].completion_tokens = 100;
  records[1].completion_tokens = 300;

  const LengthStats provider = length_stats(records, LengthMode::provider_tokens);
  CHECK(provider.mean == 200.0);
  CHECK(provider.median == 200.0);
  CHECK(provider.p95 == 300.0);
  CHECK(provider.mode == LengthMode::provider_tokens);

  const LengthStats whitespace =
      length_stats(records, LengthMode::whitespace_tokens);
  CHECK(whitespace.mean == 2.5);  // 3 and 2 tokens

  const LengthStats chars = length_stats(records, LengthMode::chars);
  CHECK(chars.mean == doctest::Approx((16.0 + 7.0) / 2.0));

  // Provider and whitespace modes measure different things; both are labeled.
  CHECK(provider.mean != whitespace.mean);
  CHECK(to_string(provider.mode) == "provider_tokens");
  CHECK(to_string(whitespace.mode) == "whitespace_tokens");

  records[1].completion_tokens.reset();
  CHECK_THROWS_AS(length_stats(records, LengthMode::provider_tokens),
                  MissingTokenCounts);
  CHECK_THROWS_AS(length_stats({}, LengthMode::chars), DomainError);
}

TEST_CASE("percentile uses the nearest-rank convention") {
  std::vector<ResponseRecord> records;
  for (int i = 1; i <= 100; ++i) {
    auto r = make_record("p" + std::to_string(i), 0, "x");
    r.completion_tokens = i;
    records.push_back(std::move(r));
  }
  const LengthStats stats = length_stats(records, LengthMode::provider_tokens);
  CHECK(stats.median == 50.5);
  CHECK(stats.p95 == 95.0);
}

TEST_CASE("records and scores round-trip through JSONL") {
  std::vector<ResponseRecord> records;
  SplitMix64 rng(777);
  for (int i = 0; i < 50; ++i) {
    auto r = make_record("p" + std::to_string(rng.below(10)),
                         static_cast<int>(rng.below(4)),
                         "text with\nnewlines and \"quotes\" #" +
                             std::to_string(rng.next()));
    if (rng.below(2) == 0) r.completion_tokens = static_cast<long long>(rng.below(5000));
    r.finish_reason = rng.below(5) == 0 ? FinishReason::length : FinishReason::stop;
    r.sampling = {0.6, 0.95, 16384};
    records.push_back(std::move(r));
  }
  const std::string path = "test_records_roundtrip.jsonl";
  write_records_jsonl(records, path);
  CHECK(read_records_jsonl(path) == records);
  std::remove(path.c_str());

  std::vector<ScoredResponse> scored;
  for (int i = 0; i < 50; ++i) {
    ScoredResponse s = make_scored("p" + std::to_string(i), 0, i % 3 == 0,
                                   static_cast<long long>(i * 7));
    if (i % 2 == 0) s.extracted = std::to_string(i);
    if (i % 4 == 0) s.length_tokens = i;
    if (i % 5 == 0) s.op_count = 5 + i % 11;
    scored.push_back(std::move(s));
  }
  const std::string spath = "test_scores_roundtrip.jsonl";
  write_scores_jsonl(scored, spath);
  CHECK(read_scores_jsonl(spath) == scored);
  std::remove(spath.c_str());
}

TEST_CASE("ground truth loading and scoring drivers") {
  const std::string path = "test_truth.jsonl";
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs(
        "{\"id\":\"p1\",\"answer\":\"11440\",\"op_count\":10}\n"
        "{\"id\":\"p2\",\"answer\":42}\n"
        "{\"id\":\"p3\",\"answer\":\"ok then\",\"answer_mode\":\"exact-string\"}\n",
        f);
    std::fclose(f);
  }
  const auto truth = load_ground_truth(path, AnswerMode::integer);
  REQUIRE(truth.size() == 3);
  CHECK(truth.at("p1").answer_int == 11440);
  CHECK(truth.at("p1").op_count == 10);
  CHECK(truth.at("p2").answer_int == 42);
  CHECK(truth.at("p3").mode == AnswerMode::exact_string);

  const std::vector<ResponseRecord> records{
      make_record("p1", 0, fixtures::kCleanSolve),
      make_record("p2", 0, "\\boxed{42}"),
      make_record("p3", 0, "\\boxed{ok then}")};
  const auto scored = score_records(records, truth);
  REQUIRE(scored.size() == 3);
  CHECK(scored[0].correct);
  CHECK(scored[0].op_count == 10);
  CHECK(scored[1].correct);
  CHECK(scored[2].correct);

  CHECK_THROWS_AS(score_records({make_record("nope", 0, "x")}, truth), Error);
  std::remove(path.c_str());
}
