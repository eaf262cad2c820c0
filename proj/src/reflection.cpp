#include "cotlab/reflection.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "cotlab/jsonl.hpp"

namespace cotlab {

KeywordPool KeywordPool::default_pool() {
  KeywordPool pool;
  pool.phrases = {"recheck",      "rethink",     "reassess",
                  "reevaluate",   "re-evaluate", "reevaluation",
                  "re-examine",   "reexamine",   "reconsider",
                  "reanalyze",    "double-check", "check again",
                  "think again",  "verify again", "go over the steps"};
  pool.validate();
  return pool;
}

KeywordPool KeywordPool::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open keyword file " + path);
  KeywordPool pool;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && line[start] == ' ') ++start;
    line.erase(0, start);
    if (!line.empty()) pool.phrases.push_back(line);
  }
  pool.validate();
  return pool;
}

void KeywordPool::validate() const {
  if (phrases.empty()) throw ConfigInvalid("keyword pool must be nonempty");
  std::set<std::string> seen;
  for (const std::string& phrase : phrases) {
    if (phrase.empty()) throw ConfigInvalid("keyword pool phrase is empty");
    for (char c : phrase)
      if (std::isupper(static_cast<unsigned char>(c)))
        throw ConfigInvalid("keyword pool phrase not lowercase: " + phrase);
    if (!seen.insert(phrase).second)
      throw ConfigInvalid("duplicate keyword pool phrase: " + phrase);
  }
}

std::string to_string(ReflectionPolicy policy) {
  switch (policy) {
    case ReflectionPolicy::conjunction: return "conjunction";
    case ReflectionPolicy::disjunction: return "disjunction";
    case ReflectionPolicy::keyword_only: return "keyword_only";
  }
  return "keyword_only";
}

ReflectionPolicy reflection_policy_from_string(std::string_view text) {
  if (text == "conjunction") return ReflectionPolicy::conjunction;
  if (text == "disjunction") return ReflectionPolicy::disjunction;
  if (text == "keyword_only") return ReflectionPolicy::keyword_only;
  throw DomainError("unknown reflection policy: " + std::string(text));
}

KeywordMatch keyword_detect(std::string_view text, const KeywordPool& pool) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  KeywordMatch match;
  for (const std::string& phrase : pool.phrases) {
    if (lowered.find(phrase) != std::string::npos) {
      match.hit = true;
      match.matched.push_back(phrase);
    }
  }
  return match;
}

namespace {

std::optional<bool> parse_verdict(std::string_view reply) {
  std::string token;
  for (std::size_t i = 0; i <= reply.size(); ++i) {
    const bool is_alpha =
        i < reply.size() && std::isalpha(static_cast<unsigned char>(reply[i]));
    if (is_alpha) {
      token.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i]))));
      continue;
    }
    if (token == "yes") return true;
    if (token == "no") return false;
    token.clear();
  }
  return std::nullopt;
}

}  // namespace

bool llm_judge(std::string_view text, JudgeClient& judge,
               const JudgePrompt& prompt) {
  std::string shown;
  if (text.size() > prompt.head_chars + prompt.tail_chars) {
    shown = std::string(text.substr(0, prompt.head_chars)) +
            "\n[... middle omitted ...]\n" +
            std::string(text.substr(text.size() - prompt.tail_chars));
  } else {
    shown = std::string(text);
  }
  std::string filled = prompt.template_text;
  const std::size_t slot = filled.find("{response}");
  if (slot == std::string::npos)
    throw ConfigInvalid("judge prompt template lacks a {response} slot");
  filled.replace(slot, std::string("{response}").size(), shown);

  constexpr int kAttempts = 4;  // one call plus up to three retries
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::string reply = judge.complete(filled);
    if (const auto verdict = parse_verdict(reply)) return *verdict;
  }
  throw JudgeUnparseable("judge produced no YES/NO verdict after " +
                         std::to_string(kAttempts) + " attempts");
}

bool cross_validate(bool keyword_hit, std::optional<bool> judge_verdict,
                    ReflectionPolicy policy) {
  switch (policy) {
    case ReflectionPolicy::keyword_only:
      return keyword_hit;
    case ReflectionPolicy::conjunction:
      if (!judge_verdict)
        throw MissingJudgeVerdict("conjunction policy requires a judge verdict");
      return keyword_hit && *judge_verdict;
    case ReflectionPolicy::disjunction:
      if (!judge_verdict)
        throw MissingJudgeVerdict("disjunction policy requires a judge verdict");
      return keyword_hit || *judge_verdict;
  }
  throw DomainError("unknown policy");
}

ReflectionStats reflection_report(const std::vector<ReflectionLabel>& labels,
                                  const std::vector<ScoredResponse>& scored) {
  std::map<std::pair<std::string, int>, const ScoredResponse*> by_key;
  for (const ScoredResponse& s : scored) {
    if (!by_key.emplace(std::make_pair(s.problem_id, s.sample_index), &s).second)
      throw JoinMismatch("duplicate scored response " + s.problem_id + "#" +
                         std::to_string(s.sample_index));
  }
  if (labels.size() != scored.size())
    throw JoinMismatch("label and score sets differ in size");

  const bool all_tokens =
      !scored.empty() &&
      std::all_of(scored.begin(), scored.end(), [](const ScoredResponse& s) {
        return s.length_tokens.has_value();
      });

  ReflectionStats stats;
  stats.length_mode =
      all_tokens ? LengthMode::provider_tokens : LengthMode::chars;
  double reflective_total = 0.0, nonreflective_total = 0.0;
  long long reflective_n = 0, nonreflective_n = 0;
  std::set<std::pair<std::string, int>> seen;
  for (const ReflectionLabel& label : labels) {
    const auto key = std::make_pair(label.problem_id, label.sample_index);
    const auto it = by_key.find(key);
    if (it == by_key.end() || !seen.insert(key).second)
      throw JoinMismatch("label without matching score: " + label.problem_id +
                         "#" + std::to_string(label.sample_index));
    const ScoredResponse& s = *it->second;
    const double length = static_cast<double>(
        all_tokens ? *s.length_tokens : s.length_chars);
    if (label.final_verdict) {
      reflective_total += length;
      ++reflective_n;
    } else {
      nonreflective_total += length;
      ++nonreflective_n;
    }
  }
  stats.n_responses = static_cast<long long>(labels.size());
  stats.n_reflective = reflective_n;
  stats.ratio = stats.n_responses == 0
                    ? 0.0
                    : static_cast<double>(reflective_n) /
                          static_cast<double>(stats.n_responses);
  if (reflective_n > 0)
    stats.reflective_mean_length =
        reflective_total / static_cast<double>(reflective_n);
  if (nonreflective_n > 0)
    stats.nonreflective_mean_length =
        nonreflective_total / static_cast<double>(nonreflective_n);
  if (stats.reflective_mean_length && stats.nonreflective_mean_length)
    stats.length_gap =
        *stats.reflective_mean_length - *stats.nonreflective_mean_length;
  return stats;
}

void write_labels_jsonl(const std::vector<ReflectionLabel>& labels,
                        const std::string& path) {
  JsonlWriter out(path);
  for (const ReflectionLabel& label : labels) {
    nlohmann::json j{{"problem_id", label.problem_id},
                     {"sample_index", label.sample_index},
                     {"keyword_hit", label.keyword_hit},
                     {"matched_phrases", label.matched_phrases},
                     {"final", label.final_verdict},
                     {"policy", to_string(label.policy)}};
    if (label.judge_verdict) j["judge_verdict"] = *label.judge_verdict;
    out.write(j);
  }
  out.flush();
}

std::vector<ReflectionLabel> read_labels_jsonl(const std::string& path) {
  std::vector<ReflectionLabel> labels;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& j) {
    try {
      ReflectionLabel label;
      label.problem_id = j.at("problem_id").get<std::string>();
      label.sample_index = j.at("sample_index").get<int>();
      label.keyword_hit = j.at("keyword_hit").get<bool>();
      label.matched_phrases =
          j.value("matched_phrases", std::vector<std::string>{});
      if (j.contains("judge_verdict") && !j.at("judge_verdict").is_null())
        label.judge_verdict = j.at("judge_verdict").get<bool>();
      label.final_verdict = j.at("final").get<bool>();
      label.policy =
          reflection_policy_from_string(j.value("policy", std::string{"keyword_only"}));
      labels.push_back(std::move(label));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return labels;
}

nlohmann::json to_json(const ReflectionStats& stats) {
  nlohmann::json j{{"n_responses", stats.n_responses},
                   {"n_reflective", stats.n_reflective},
                   {"ratio", stats.ratio},
                   {"length_mode", to_string(stats.length_mode)}};
  if (stats.reflective_mean_length)
    j["reflective_mean_length"] = *stats.reflective_mean_length;
  if (stats.nonreflective_mean_length)
    j["nonreflective_mean_length"] = *stats.nonreflective_mean_length;
  if (stats.length_gap) j["length_gap"] = *stats.length_gap;
  return j;
}

ReflectionStats reflection_stats_from_json(const nlohmann::json& j) {
  ReflectionStats stats;
  stats.n_responses = j.at("n_responses").get<long long>();
  stats.n_reflective = j.at("n_reflective").get<long long>();
  stats.ratio = j.at("ratio").get<double>();
  stats.length_mode =
      length_mode_from_string(j.value("length_mode", std::string{"chars"}));
  if (j.contains("reflective_mean_length"))
    stats.reflective_mean_length = j.at("reflective_mean_length").get<double>();
  if (j.contains("nonreflective_mean_length"))
    stats.nonreflective_mean_length =
        j.at("nonreflective_mean_length").get<double>();
  if (j.contains("length_gap")) stats.length_gap = j.at("length_gap").get<double>();
  return stats;
}

void write_reflection_stats_json(const ReflectionStats& stats,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(stats).dump(2) << '\n';
}

ReflectionStats read_reflection_stats_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return reflection_stats_from_json(j);
}

}  // namespace cotlab
