#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotlab/errors.hpp"
#include "json.hpp"

namespace cotlab {

enum class FinishReason { stop, length, other };

std::string to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view text);

enum class LengthMode { provider_tokens, whitespace_tokens, chars };

std::string to_string(LengthMode mode);
LengthMode length_mode_from_string(std::string_view text);

struct Sampling {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 16384;

  friend bool operator==(const Sampling&, const Sampling&) = default;
};

// One sampled model completion.
struct ResponseRecord {
  std::string problem_id;
  int sample_index = 0;
  std::string text;
  std::optional<long long> completion_tokens;  // provider-reported
  FinishReason finish_reason = FinishReason::stop;
  std::string model_label;
  Sampling sampling;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct ScoredResponse {
  std::string problem_id;
  int sample_index = 0;
  std::optional<std::string> extracted;
  bool correct = false;
  bool truncated = false;
  long long length_chars = 0;
  std::optional<long long> length_tokens;
  // Carried from the problem file when known so fits can bin by it without
  // re-joining against the problem set.
  std::optional<int> op_count;

  friend bool operator==(const ScoredResponse&, const ScoredResponse&) = default;
};

struct BenchmarkStats {
  int n_problems = 0;
  int k = 0;
  double avg_at_k = 0.0;
  std::vector<std::pair<std::string, double>> per_problem;  // sorted by id
  double mean_length = 0.0;
  LengthMode length_mode = LengthMode::chars;
};

struct LengthStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  LengthMode mode = LengthMode::chars;
};

class IncompleteRun : public Error {
 public:
  IncompleteRun(const std::string& message, std::vector<std::string> offending)
      : Error(message), offending_ids(std::move(offending)) {}
  std::vector<std::string> offending_ids;
};

class MissingTokenCounts : public Error {
 public:
  using Error::Error;
};

// Content of the last well-balanced "\boxed{...}" (brace matching, nesting
// allowed). Falls back to the last line with a "final answer" marker
// followed by a number. Absence is a value, not an error.
std::optional<std::string> extract_final_answer(std::string_view text);

// Whitespace, thousands separators, a leading '+' and surrounding math
// fences stripped; then parsed as a signed decimal integer.
std::optional<std::int64_t> normalize_answer(std::string_view raw);

ScoredResponse score_response(const ResponseRecord& record, std::int64_t truth);

// exact-string mode: extracted text (trimmed) must equal the stored answer.
ScoredResponse score_response_exact(const ResponseRecord& record,
                                    std::string_view truth);

// Validates that every problem has exactly k distinct samples, then averages
// correctness over all responses. Mean length prefers provider token counts
// when every record has one, otherwise falls back to characters.
BenchmarkStats aggregate_avg_at_k(const std::vector<ScoredResponse>& scored, int k);

LengthStats length_stats(const std::vector<ResponseRecord>& records, LengthMode mode);

// --- ground truth + scoring drivers -------------------------------------

enum class AnswerMode { integer, exact_string };

struct GroundTruth {
  std::string answer_text;
  std::optional<std::int64_t> answer_int;
  AnswerMode mode = AnswerMode::integer;
  std::optional<int> op_count;
};

// Reads a problems file (id, answer, optional answer_mode / op_count).
std::map<std::string, GroundTruth> load_ground_truth(const std::string& path,
                                                     AnswerMode default_mode);

// Scores every record against its problem. Unknown problem_id is an error.
std::vector<ScoredResponse> score_records(
    const std::vector<ResponseRecord>& records,
    const std::map<std::string, GroundTruth>& truth);

// --- JSONL / JSON serialization ------------------------------------------

nlohmann::json to_json(const ResponseRecord& record);
ResponseRecord response_record_from_json(const nlohmann::json& j);

void write_records_jsonl(const std::vector<ResponseRecord>& records,
                         const std::string& path);
std::vector<ResponseRecord> read_records_jsonl(const std::string& path);

void write_scores_jsonl(const std::vector<ScoredResponse>& scored,
                        const std::string& path);
std::vector<ScoredResponse> read_scores_jsonl(const std::string& path);

nlohmann::json to_json(const BenchmarkStats& stats);
BenchmarkStats benchmark_stats_from_json(const nlohmann::json& j);

void write_stats_json(const BenchmarkStats& stats, const std::string& path);
BenchmarkStats read_stats_json(const std::string& path);

}  // namespace cotlab
