#include "cotlab/answer_eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "cotlab/jsonl.hpp"

namespace cotlab {

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::other: return "other";
  }
  return "other";
}

FinishReason finish_reason_from_string(std::string_view text) {
  if (text == "stop") return FinishReason::stop;
  if (text == "length") return FinishReason::length;
  return FinishReason::other;
}

std::string to_string(LengthMode mode) {
  switch (mode) {
    case LengthMode::provider_tokens: return "provider_tokens";
    case LengthMode::whitespace_tokens: return "whitespace_tokens";
    case LengthMode::chars: return "chars";
  }
  return "chars";
}

LengthMode length_mode_from_string(std::string_view text) {
  if (text == "provider_tokens") return LengthMode::provider_tokens;
  if (text == "whitespace_tokens") return LengthMode::whitespace_tokens;
  if (text == "chars") return LengthMode::chars;
  throw DomainError("unknown length mode: " + std::string(text));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

// Content of "\boxed{...}" starting at the opening brace, or nullopt when the
// braces never balance (e.g. a truncated response).
std::optional<std::string> balanced_brace_content(std::string_view text,
                                                  std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0)
      return std::string(text.substr(open + 1, i - open - 1));
  }
  return std::nullopt;
}

bool ascii_equals_lower(std::string_view text, std::string_view lower_pattern,
                        std::size_t at) {
  if (at + lower_pattern.size() > text.size()) return false;
  for (std::size_t i = 0; i < lower_pattern.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(text[at + i])) != lower_pattern[i])
      return false;
  return true;
}

// Number token following a "final answer" marker: optional sign, digits,
// interior thousands separators.
std::optional<std::string> number_after_marker(std::string_view line) {
  static constexpr std::string_view kMarker = "final answer";
  std::size_t marker = std::string_view::npos;
  for (std::size_t i = 0; i + kMarker.size() <= line.size(); ++i)
    if (ascii_equals_lower(line, kMarker, i)) marker = i;
  if (marker == std::string_view::npos) return std::nullopt;

  for (std::size_t i = marker + kMarker.size(); i < line.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(line[i]))) continue;
    std::size_t start = i;
    if (start > 0 && (line[start - 1] == '-' || line[start - 1] == '+')) --start;
    std::size_t end = i;
    while (end < line.size() &&
           (std::isdigit(static_cast<unsigned char>(line[end])) || line[end] == ','))
      ++end;
    while (end > i && line[end - 1] == ',') --end;  // trailing comma is prose
    return std::string(line.substr(start, end - start));
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_final_answer(std::string_view text) {
  static constexpr std::string_view kBox = "\\boxed{";
  std::optional<std::string> last_boxed;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(kBox, pos);
    if (hit == std::string_view::npos) break;
    if (auto content = balanced_brace_content(text, hit + kBox.size() - 1))
      last_boxed = std::move(content);
    pos = hit + kBox.size();
  }
  if (last_boxed) return last_boxed;

  // Fallback: last line announcing a final answer with a number.
  std::optional<std::string> last_marker;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    if (auto token = number_after_marker(text.substr(start, nl - start)))
      last_marker = std::move(token);
    start = nl + 1;
  }
  return last_marker;
}

std::optional<std::int64_t> normalize_answer(std::string_view raw) {
  std::string_view s = trim(raw);
  // Surrounding math fences: $...$, \(...\), \[...\].
  bool stripped = true;
  while (stripped && !s.empty()) {
    stripped = false;
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
      s = trim(s.substr(1, s.size() - 2));
      stripped = true;
    }
    if (s.size() >= 4 && s.substr(0, 2) == "\\(" && s.substr(s.size() - 2) == "\\)") {
      s = trim(s.substr(2, s.size() - 4));
      stripped = true;
    }
    if (s.size() >= 4 && s.substr(0, 2) == "\\[" && s.substr(s.size() - 2) == "\\]") {
      s = trim(s.substr(2, s.size() - 4));
      stripped = true;
    }
  }
  std::string digits;
  digits.reserve(s.size());
  for (char c : s) {
    if (c == ',') continue;  // thousands separator
    digits.push_back(c);
  }
  std::string_view v = digits;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || ptr != v.data() + v.size()) return std::nullopt;
  return value;
}

namespace {

ScoredResponse score_common(const ResponseRecord& record) {
  ScoredResponse s;
  s.problem_id = record.problem_id;
  s.sample_index = record.sample_index;
  s.extracted = extract_final_answer(record.text);
  s.truncated = record.finish_reason == FinishReason::length;
  s.length_chars = static_cast<long long>(record.text.size());
  s.length_tokens = record.completion_tokens;
  return s;
}

}  // namespace

ScoredResponse score_response(const ResponseRecord& record, std::int64_t truth) {
  ScoredResponse s = score_common(record);
  if (s.extracted) {
    const auto value = normalize_answer(*s.extracted);
    s.correct = value.has_value() && *value == truth;
  }
  return s;
}

ScoredResponse score_response_exact(const ResponseRecord& record,
                                    std::string_view truth) {
  ScoredResponse s = score_common(record);
  if (s.extracted) s.correct = trim(*s.extracted) == trim(truth);
  return s;
}

BenchmarkStats aggregate_avg_at_k(const std::vector<ScoredResponse>& scored, int k) {
  if (k < 1) throw DomainError("k must be >= 1");
  std::map<std::string, std::vector<const ScoredResponse*>> by_problem;
  for (const ScoredResponse& s : scored) by_problem[s.problem_id].push_back(&s);

  std::vector<std::string> offending;
  for (const auto& [id, responses] : by_problem) {
    std::set<int> indices;
    for (const ScoredResponse* r : responses) indices.insert(r->sample_index);
    // Exactly k responses with sample indices 0..k-1.
    if (static_cast<int>(responses.size()) != k ||
        static_cast<int>(indices.size()) != k || *indices.begin() != 0 ||
        *indices.rbegin() != k - 1)
      offending.push_back(id);
  }
  if (!offending.empty()) {
    std::string msg = "problems without exactly " + std::to_string(k) +
                      " distinct samples:";
    for (const std::string& id : offending) msg += ' ' + id;
    throw IncompleteRun(msg, std::move(offending));
  }

  BenchmarkStats stats;
  stats.n_problems = static_cast<int>(by_problem.size());
  stats.k = k;
  const bool all_tokens = std::all_of(
      scored.begin(), scored.end(),
      [](const ScoredResponse& s) { return s.length_tokens.has_value(); });
  stats.length_mode =
      all_tokens && !scored.empty() ? LengthMode::provider_tokens : LengthMode::chars;

  long long correct_total = 0;
  double length_total = 0.0;
  for (const auto& [id, responses] : by_problem) {
    int correct_here = 0;
    for (const ScoredResponse* r : responses) {
      correct_here += r->correct ? 1 : 0;
      length_total += static_cast<double>(
          stats.length_mode == LengthMode::provider_tokens ? *r->length_tokens
                                                           : r->length_chars);
    }
    correct_total += correct_here;
    stats.per_problem.emplace_back(id, static_cast<double>(correct_here) / k);
  }
  const auto n_responses = static_cast<double>(scored.size());
  stats.avg_at_k = n_responses == 0 ? 0.0 : static_cast<double>(correct_total) / n_responses;
  stats.mean_length = n_responses == 0 ? 0.0 : length_total / n_responses;
  return stats;
}

namespace {

long long whitespace_token_count(std::string_view text) {
  long long count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

double order_statistic_median(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

LengthStats length_stats(const std::vector<ResponseRecord>& records, LengthMode mode) {
  if (records.empty()) throw DomainError("length_stats requires records");
  std::vector<double> lengths;
  lengths.reserve(records.size());
  for (const ResponseRecord& r : records) {
    switch (mode) {
      case LengthMode::provider_tokens:
        if (!r.completion_tokens)
          throw MissingTokenCounts("record " + r.problem_id + "#" +
                                   std::to_string(r.sample_index) +
                                   " has no completion_tokens");
        lengths.push_back(static_cast<double>(*r.completion_tokens));
        break;
      case LengthMode::whitespace_tokens:
        lengths.push_back(static_cast<double>(whitespace_token_count(r.text)));
        break;
      case LengthMode::chars:
        lengths.push_back(static_cast<double>(r.text.size()));
        break;
    }
  }
  LengthStats stats;
  stats.mode = mode;
  double sum = 0.0;
  for (double v : lengths) sum += v;
  stats.mean = sum / static_cast<double>(lengths.size());
  stats.median = order_statistic_median(lengths);
  // Nearest-rank 95th percentile on the sorted values.
  const auto rank = static_cast<std::size_t>(
      std::max<double>(1.0, std::ceil(0.95 * static_cast<double>(lengths.size()))));
  stats.p95 = lengths[rank - 1];
  return stats;
}

std::map<std::string, GroundTruth> load_ground_truth(const std::string& path,
                                                     AnswerMode default_mode) {
  std::map<std::string, GroundTruth> truth;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& j) {
    GroundTruth g;
    std::string id;
    try {
      id = j.at("id").get<std::string>();
      const auto& answer = j.at("answer");
      g.answer_text = answer.is_string() ? answer.get<std::string>()
                                         : answer.dump();
      g.mode = default_mode;
      if (j.contains("answer_mode")) {
        const auto mode = j.at("answer_mode").get<std::string>();
        if (mode == "integer")
          g.mode = AnswerMode::integer;
        else if (mode == "exact-string")
          g.mode = AnswerMode::exact_string;
        else
          throw Error("unknown answer_mode: " + mode);
      }
      if (j.contains("op_count")) g.op_count = j.at("op_count").get<int>();
      if (g.mode == AnswerMode::integer) {
        const auto value = normalize_answer(g.answer_text);
        if (!value)
          throw Error("answer is not an integer but answer_mode is integer");
        g.answer_int = *value;
      }
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    truth.emplace(std::move(id), std::move(g));
  });
  return truth;
}

std::vector<ScoredResponse> score_records(
    const std::vector<ResponseRecord>& records,
    const std::map<std::string, GroundTruth>& truth) {
  std::vector<ScoredResponse> scored;
  scored.reserve(records.size());
  for (const ResponseRecord& r : records) {
    const auto it = truth.find(r.problem_id);
    if (it == truth.end())
      throw Error("response references unknown problem_id " + r.problem_id);
    const GroundTruth& g = it->second;
    ScoredResponse s = g.mode == AnswerMode::integer
                           ? score_response(r, *g.answer_int)
                           : score_response_exact(r, g.answer_text);
    s.op_count = g.op_count;
    scored.push_back(std::move(s));
  }
  return scored;
}

// --- serialization --------------------------------------------------------

nlohmann::json to_json(const ResponseRecord& r) {
  nlohmann::json j{{"problem_id", r.problem_id},
                   {"sample_index", r.sample_index},
                   {"text", r.text},
                   {"finish_reason", to_string(r.finish_reason)},
                   {"model_label", r.model_label},
                   {"sampling",
                    {{"temperature", r.sampling.temperature},
                     {"top_p", r.sampling.top_p},
                     {"max_tokens", r.sampling.max_tokens}}}};
  if (r.completion_tokens) j["completion_tokens"] = *r.completion_tokens;
  return j;
}

ResponseRecord response_record_from_json(const nlohmann::json& j) {
  ResponseRecord r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.sample_index = j.at("sample_index").get<int>();
  r.text = j.at("text").get<std::string>();
  if (j.contains("completion_tokens") && !j.at("completion_tokens").is_null())
    r.completion_tokens = j.at("completion_tokens").get<long long>();
  r.finish_reason =
      finish_reason_from_string(j.value("finish_reason", std::string{"other"}));
  r.model_label = j.value("model_label", std::string{});
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    r.sampling.temperature = s.value("temperature", 0.0);
    r.sampling.top_p = s.value("top_p", 1.0);
    r.sampling.max_tokens = s.value("max_tokens", 0);
  }
  return r;
}

namespace {

nlohmann::json to_json(const ScoredResponse& s) {
  nlohmann::json j{{"problem_id", s.problem_id},
                   {"sample_index", s.sample_index},
                   {"correct", s.correct},
                   {"truncated", s.truncated},
                   {"length_chars", s.length_chars}};
  if (s.extracted) j["extracted"] = *s.extracted;
  if (s.length_tokens) j["length_tokens"] = *s.length_tokens;
  if (s.op_count) j["op_count"] = *s.op_count;
  return j;
}

ScoredResponse scored_from_json(const nlohmann::json& j) {
  ScoredResponse s;
  s.problem_id = j.at("problem_id").get<std::string>();
  s.sample_index = j.at("sample_index").get<int>();
  if (j.contains("extracted") && !j.at("extracted").is_null())
    s.extracted = j.at("extracted").get<std::string>();
  s.correct = j.at("correct").get<bool>();
  s.truncated = j.value("truncated", false);
  s.length_chars = j.value("length_chars", 0LL);
  if (j.contains("length_tokens") && !j.at("length_tokens").is_null())
    s.length_tokens = j.at("length_tokens").get<long long>();
  if (j.contains("op_count") && !j.at("op_count").is_null())
    s.op_count = j.at("op_count").get<int>();
  return s;
}

}  // namespace

void write_records_jsonl(const std::vector<ResponseRecord>& records,
                         const std::string& path) {
  JsonlWriter out(path);
  for (const ResponseRecord& r : records) out.write(to_json(r));
  out.flush();
}

std::vector<ResponseRecord> read_records_jsonl(const std::string& path) {
  std::vector<ResponseRecord> records;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& j) {
    try {
      records.push_back(response_record_from_json(j));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return records;
}

void write_scores_jsonl(const std::vector<ScoredResponse>& scored,
                        const std::string& path) {
  JsonlWriter out(path);
  for (const ScoredResponse& s : scored) out.write(to_json(s));
  out.flush();
}

std::vector<ScoredResponse> read_scores_jsonl(const std::string& path) {
  std::vector<ScoredResponse> scored;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& j) {
    try {
      scored.push_back(scored_from_json(j));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return scored;
}

nlohmann::json to_json(const BenchmarkStats& stats) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [id, mean] : stats.per_problem)
    per.push_back({{"problem_id", id}, {"mean_correct", mean}});
  return {{"n_problems", stats.n_problems},
          {"k", stats.k},
          {"avg_at_k", stats.avg_at_k},
          {"per_problem", per},
          {"mean_length", stats.mean_length},
          {"length_mode", to_string(stats.length_mode)}};
}

BenchmarkStats benchmark_stats_from_json(const nlohmann::json& j) {
  BenchmarkStats stats;
  stats.n_problems = j.at("n_problems").get<int>();
  stats.k = j.at("k").get<int>();
  stats.avg_at_k = j.at("avg_at_k").get<double>();
  for (const auto& item : j.at("per_problem"))
    stats.per_problem.emplace_back(item.at("problem_id").get<std::string>(),
                                   item.at("mean_correct").get<double>());
  stats.mean_length = j.at("mean_length").get<double>();
  stats.length_mode = length_mode_from_string(j.at("length_mode").get<std::string>());
  return stats;
}

void write_stats_json(const BenchmarkStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(stats).dump(2) << '\n';
}

BenchmarkStats read_stats_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return benchmark_stats_from_json(j);
}

}  // namespace cotlab
