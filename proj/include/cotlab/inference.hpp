#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/errors.hpp"
#include "cotlab/generator.hpp"
#include "cotlab/reflection.hpp"

namespace cotlab {

struct SamplingConfig {
  int k = 4;
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 16384;
  std::optional<std::string> system_prompt;
  // {problem} slot receives the problem expression/text.
  std::string user_template =
      "Evaluate the following arithmetic expression step by step and put "
      "the final answer in \\boxed{}.\n\n{problem}";

  void validate() const;  // throws ConfigInvalid
};

struct EndpointConfig {
  std::string base_url;        // e.g. http://host:port/v1
  std::string model_name;
  std::string auth_token_env;  // name of the env var holding the bearer token
  int max_concurrency = 4;
  double timeout_seconds = 120.0;
  int retry_max_attempts = 3;
  double retry_base_backoff_seconds = 0.5;

  void validate() const;  // throws ConfigInvalid
};

struct RunManifest {
  std::string run_id;
  std::set<std::pair<std::string, int>> completed;  // (problem_id, sample_index)
  std::uint64_t config_digest = 0;
};

struct RunSummary {
  long long requested = 0;   // requests actually issued this run
  long long completed = 0;   // records persisted this run
  long long skipped = 0;     // records already present
  long long failed = 0;      // tasks that exhausted their retries
  std::vector<std::string> failures;  // "problem_id#index: reason" (capped)
};

class CorruptStore : public Error {
 public:
  using Error::Error;
};

class AuthMissing : public Error {
 public:
  using Error::Error;
};

class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// Append-only JSONL store of ResponseRecords with a sidecar manifest
// (<path>.manifest.json) holding the run id and config digest.
class RecordStore {
 public:
  explicit RecordStore(std::string path);

  const std::string& path() const { return path_; }
  std::string sidecar_path() const { return path_ + ".manifest.json"; }

  // Reconstructs the completed set by scanning persisted records. A trailing
  // partial line is ignored; any other malformed line raises CorruptStore.
  RunManifest scan() const;

  // Drops a trailing partial line so the next append starts line-aligned.
  void truncate_partial_tail();

  // Serializes and appends one record, newline-terminated and flushed.
  void append(const ResponseRecord& record);

  std::vector<ResponseRecord> read_all() const;

 private:
  std::string path_;
};

RunManifest resume_manifest(const std::string& store_path);

// Digest of everything that makes runs comparable: sampling parameters,
// prompt template, model name and the problem set.
std::uint64_t run_config_digest(const std::vector<ProblemInstance>& problems,
                                const SamplingConfig& sampling,
                                const EndpointConfig& endpoint);

// Samples k completions per problem with at most max_concurrency requests in
// flight, persisting each record before marking it complete. Resumable:
// existing (problem, sample) pairs are skipped; a digest mismatch against the
// sidecar raises ConfigMismatch.
RunSummary sample_completions(const std::vector<ProblemInstance>& problems,
                              const SamplingConfig& sampling,
                              const EndpointConfig& endpoint, RecordStore& store);

// Minimal chat-completions transport. One request per call; retry policy
// lives with the caller.
class ChatCompletionsClient {
 public:
  explicit ChatCompletionsClient(const EndpointConfig& endpoint);
  ~ChatCompletionsClient();

  struct Completion {
    std::string text;
    std::string finish_reason;
    std::optional<long long> completion_tokens;
  };

  struct Message {
    std::string role;
    std::string content;
  };

  // Throws TransportError (retryable) or Error (non-retryable, e.g. 4xx).
  Completion complete(const std::vector<Message>& messages, double temperature,
                      double top_p, int max_tokens);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Judge transport over a chat-completions endpoint (temperature 0).
class HttpJudgeClient : public JudgeClient {
 public:
  HttpJudgeClient(const EndpointConfig& endpoint, int max_tokens = 8);
  std::string complete(const std::string& prompt) override;

 private:
  ChatCompletionsClient client_;
  int max_tokens_;
};

}  // namespace cotlab
