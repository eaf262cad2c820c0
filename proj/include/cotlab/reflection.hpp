#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/errors.hpp"

namespace cotlab {

// Curated phrases indicating reflective reasoning. All lowercase, no
// duplicates, matched as substrings of the lowered response text.
struct KeywordPool {
  std::vector<std::string> phrases;

  static KeywordPool default_pool();
  static KeywordPool from_file(const std::string& path);  // one phrase per line
  void validate() const;                                  // throws ConfigInvalid
};

enum class ReflectionPolicy { conjunction, disjunction, keyword_only };

std::string to_string(ReflectionPolicy policy);
ReflectionPolicy reflection_policy_from_string(std::string_view text);

struct ReflectionLabel {
  std::string problem_id;
  int sample_index = 0;
  bool keyword_hit = false;
  std::vector<std::string> matched_phrases;
  std::optional<bool> judge_verdict;
  bool final_verdict = false;
  ReflectionPolicy policy = ReflectionPolicy::keyword_only;
};

struct KeywordMatch {
  bool hit = false;
  std::vector<std::string> matched;  // in pool order
};

// Case-insensitive substring search of every pool phrase.
KeywordMatch keyword_detect(std::string_view text, const KeywordPool& pool);

// Transport for judge completions; mocked in tests, HTTP-backed in the CLI.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Returns the judge's raw reply. Throws JudgeUnavailable on transport
  // failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

struct JudgePrompt {
  // {response} slot receives the (possibly truncated) response text.
  // Toolkit-default wording; not a reproduction of any external template.
  std::string template_text =
      "Decide whether the following model response shows reflective "
      "behavior: going back over earlier steps, double-checking results, or "
      "revising its own reasoning.\n\nResponse:\n```\n{response}\n```\n\n"
      "Reply with exactly one word: YES or NO.";
  std::size_t head_chars = 6000;  // kept from the front when truncating
  std::size_t tail_chars = 2000;  // kept from the back when truncating
};

class JudgeUnavailable : public Error {
 public:
  using Error::Error;
};

class JudgeUnparseable : public Error {
 public:
  using Error::Error;
};

class MissingJudgeVerdict : public Error {
 public:
  using Error::Error;
};

class JoinMismatch : public Error {
 public:
  using Error::Error;
};

// Asks the judge for a strict YES/NO verdict; the first standalone yes/no
// token (case-insensitive) decides. Unparseable replies are retried up to 3
// times, then JudgeUnparseable.
bool llm_judge(std::string_view text, JudgeClient& judge,
               const JudgePrompt& prompt = {});

bool cross_validate(bool keyword_hit, std::optional<bool> judge_verdict,
                    ReflectionPolicy policy);

struct ReflectionStats {
  long long n_responses = 0;
  long long n_reflective = 0;
  double ratio = 0.0;
  std::optional<double> reflective_mean_length;
  std::optional<double> nonreflective_mean_length;
  std::optional<double> length_gap;  // reflective minus non-reflective
  LengthMode length_mode = LengthMode::chars;
};

// Joins labels with scores on (problem_id, sample_index); the two sets must
// match exactly. Lengths prefer token counts when every score has one.
ReflectionStats reflection_report(const std::vector<ReflectionLabel>& labels,
                                  const std::vector<ScoredResponse>& scored);

void write_labels_jsonl(const std::vector<ReflectionLabel>& labels,
                        const std::string& path);
std::vector<ReflectionLabel> read_labels_jsonl(const std::string& path);

nlohmann::json to_json(const ReflectionStats& stats);
ReflectionStats reflection_stats_from_json(const nlohmann::json& j);

void write_reflection_stats_json(const ReflectionStats& stats,
                                 const std::string& path);
ReflectionStats read_reflection_stats_json(const std::string& path);

}  // namespace cotlab
