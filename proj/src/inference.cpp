#include "cotlab/inference.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "cotlab/jsonl.hpp"
#include "httplib.h"

namespace cotlab {

void SamplingConfig::validate() const {
  if (k < 1) throw ConfigInvalid("k must be >= 1");
  if (temperature < 0.0) throw ConfigInvalid("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigInvalid("top_p must be in (0, 1]");
  if (max_tokens < 1) throw ConfigInvalid("max_tokens must be >= 1");
  if (user_template.find("{problem}") == std::string::npos)
    throw ConfigInvalid("user_template lacks a {problem} slot");
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigInvalid("base_url must be set");
  if (model_name.empty()) throw ConfigInvalid("model_name must be set");
  if (max_concurrency < 1) throw ConfigInvalid("max_concurrency must be >= 1");
  if (timeout_seconds <= 0.0) throw ConfigInvalid("timeout must be positive");
  if (retry_max_attempts < 1) throw ConfigInvalid("retry attempts must be >= 1");
  if (retry_base_backoff_seconds < 0.0)
    throw ConfigInvalid("retry backoff must be >= 0");
}

// --- record store ----------------------------------------------------------

RecordStore::RecordStore(std::string path) : path_(std::move(path)) {}

namespace {

// Minimal fields a stored line must carry to count as a record.
std::pair<std::string, int> record_key(const nlohmann::json& j) {
  return {j.at("problem_id").get<std::string>(), j.at("sample_index").get<int>()};
}

}  // namespace

RunManifest RecordStore::scan() const {
  RunManifest manifest;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return manifest;  // empty store

  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t start = 0, line_no = 0;
  while (start < content.size()) {
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) break;  // trailing partial line: ignored
    ++line_no;
    const std::string_view line(content.data() + start, nl - start);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // Only an unterminated final chunk is tolerated; a malformed
      // newline-terminated line means the store is damaged.
      throw CorruptStore(path_ + ":" + std::to_string(line_no) +
                         ": malformed record line");
    }
    try {
      manifest.completed.insert(record_key(j));
    } catch (const std::exception& e) {
      throw CorruptStore(path_ + ":" + std::to_string(line_no) + ": " + e.what());
    }
    start = nl + 1;
  }
  return manifest;
}

void RecordStore::truncate_partial_tail() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  in.close();
  const std::size_t last_nl = content.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != content.size())
    std::filesystem::resize_file(path_, keep);
}

void RecordStore::append(const ResponseRecord& record) {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open " + path_ + " for append");
  out << to_json(record).dump() << '\n';
  out.flush();
  if (!out) throw Error("append failed on " + path_);
}

std::vector<ResponseRecord> RecordStore::read_all() const {
  return read_records_jsonl(path_);
}

RunManifest resume_manifest(const std::string& store_path) {
  return RecordStore(store_path).scan();
}

// --- config digest ----------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::uint64_t hash, std::string_view data) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t run_config_digest(const std::vector<ProblemInstance>& problems,
                                const SamplingConfig& sampling,
                                const EndpointConfig& endpoint) {
  std::uint64_t h = 1469598103934665603ull;
  h = fnv1a(h, std::to_string(sampling.k));
  h = fnv1a(h, format_double(sampling.temperature));
  h = fnv1a(h, format_double(sampling.top_p));
  h = fnv1a(h, std::to_string(sampling.max_tokens));
  h = fnv1a(h, sampling.system_prompt.value_or("\x01none"));
  h = fnv1a(h, sampling.user_template);
  h = fnv1a(h, endpoint.model_name);
  for (const ProblemInstance& p : problems) {
    h = fnv1a(h, p.id);
    h = fnv1a(h, p.expression);
  }
  return h;
}

// --- chat client -------------------------------------------------------------

namespace {

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string prefix;     // path prefix, possibly empty
};

ParsedUrl split_base_url(const std::string& base_url) {
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
    throw ConfigInvalid("base_url must start with http:// or https://");
  const std::size_t scheme = base_url.find("://");
  const std::size_t path = base_url.find('/', scheme + 3);
  ParsedUrl parsed;
  if (path == std::string::npos) {
    parsed.host_port = base_url;
  } else {
    parsed.host_port = base_url.substr(0, path);
    parsed.prefix = base_url.substr(path);
    while (!parsed.prefix.empty() && parsed.prefix.back() == '/')
      parsed.prefix.pop_back();
  }
  return parsed;
}

}  // namespace

struct ChatCompletionsClient::Impl {
  httplib::Client http;
  std::string prefix;
  std::string model_name;

  Impl(const std::string& host_port, std::string path_prefix,
       const EndpointConfig& endpoint)
      : http(host_port), prefix(std::move(path_prefix)),
        model_name(endpoint.model_name) {
    const auto seconds = static_cast<time_t>(endpoint.timeout_seconds);
    const auto micros = static_cast<time_t>(
        (endpoint.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    http.set_connection_timeout(seconds, micros);
    http.set_read_timeout(seconds, micros);
    http.set_write_timeout(seconds, micros);
    if (!endpoint.auth_token_env.empty()) {
      const char* token = std::getenv(endpoint.auth_token_env.c_str());
      if (token == nullptr || *token == '\0')
        throw AuthMissing("environment variable " + endpoint.auth_token_env +
                          " is not set");
      http.set_default_headers(
          {{"Authorization", std::string("Bearer ") + token}});
    }
  }
};

ChatCompletionsClient::ChatCompletionsClient(const EndpointConfig& endpoint) {
  endpoint.validate();
  const ParsedUrl parsed = split_base_url(endpoint.base_url);
  impl_ = std::make_unique<Impl>(parsed.host_port, parsed.prefix, endpoint);
}

ChatCompletionsClient::~ChatCompletionsClient() = default;

ChatCompletionsClient::Completion ChatCompletionsClient::complete(
    const std::vector<Message>& messages, double temperature, double top_p,
    int max_tokens) {
  nlohmann::json body{{"model", impl_->model_name},
                      {"temperature", temperature},
                      {"top_p", top_p},
                      {"max_tokens", max_tokens},
                      {"n", 1}};
  nlohmann::json msgs = nlohmann::json::array();
  for (const Message& m : messages)
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);

  const auto result = impl_->http.Post(impl_->prefix + "/chat/completions",
                                       body.dump(), "application/json");
  if (!result)
    throw TransportError("request failed: " + httplib::to_string(result.error()));
  if (result->status == 429 || result->status >= 500)
    throw TransportError("server returned status " +
                         std::to_string(result->status));
  if (result->status < 200 || result->status >= 300)
    throw Error("server returned status " + std::to_string(result->status) +
                ": " + result->body.substr(0, 200));

  nlohmann::json j = nlohmann::json::parse(result->body, nullptr, false);
  if (j.is_discarded())
    throw TransportError("response body is not JSON");
  try {
    const auto& choice = j.at("choices").at(0);
    Completion completion;
    if (choice.contains("message"))
      completion.text = choice.at("message").at("content").get<std::string>();
    else
      completion.text = choice.at("text").get<std::string>();
    completion.finish_reason = choice.value("finish_reason", std::string{"other"});
    if (j.contains("usage") && j.at("usage").contains("completion_tokens"))
      completion.completion_tokens =
          j.at("usage").at("completion_tokens").get<long long>();
    return completion;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response shape: ") + e.what());
  }
}

// --- sampling loop ------------------------------------------------------------

namespace {

std::string fresh_run_id() {
  std::random_device rd;
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    static_cast<std::uint64_t>(now) ^
                    (static_cast<std::uint64_t>(rd()) << 32 | rd())));
  return buf;
}

struct Sidecar {
  std::string run_id;
  std::uint64_t config_digest = 0;
};

std::optional<Sidecar> load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  in >> j;
  Sidecar sidecar;
  sidecar.run_id = j.value("run_id", std::string{});
  sidecar.config_digest = std::stoull(
      j.value("config_digest", std::string{"0"}), nullptr, 16);
  return sidecar;
}

void save_sidecar(const std::string& path, const Sidecar& sidecar) {
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(sidecar.config_digest));
  const nlohmann::json j{{"run_id", sidecar.run_id}, {"config_digest", digest}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

RunSummary sample_completions(const std::vector<ProblemInstance>& problems,
                              const SamplingConfig& sampling,
                              const EndpointConfig& endpoint, RecordStore& store) {
  sampling.validate();
  endpoint.validate();

  const std::uint64_t digest = run_config_digest(problems, sampling, endpoint);
  store.truncate_partial_tail();
  RunManifest manifest = store.scan();

  if (const auto sidecar = load_sidecar(store.sidecar_path())) {
    if (sidecar->config_digest != digest)
      throw ConfigMismatch(
          "store " + store.path() +
          " was produced under a different run configuration; refusing to resume");
    manifest.run_id = sidecar->run_id;
  } else {
    manifest.run_id = fresh_run_id();
    save_sidecar(store.sidecar_path(), {manifest.run_id, digest});
  }
  manifest.config_digest = digest;

  struct Task {
    const ProblemInstance* problem;
    int sample_index;
  };
  std::vector<Task> tasks;
  RunSummary summary;
  for (const ProblemInstance& p : problems) {
    for (int j = 0; j < sampling.k; ++j) {
      if (manifest.completed.count({p.id, j}) != 0)
        ++summary.skipped;
      else
        tasks.push_back({&p, j});
    }
  }
  summary.requested = static_cast<long long>(tasks.size());
  if (tasks.empty()) return summary;

  // Fail fast on missing credentials before any thread starts.
  if (!endpoint.auth_token_env.empty()) {
    const char* token = std::getenv(endpoint.auth_token_env.c_str());
    if (token == nullptr || *token == '\0')
      throw AuthMissing("environment variable " + endpoint.auth_token_env +
                        " is not set");
  }

  std::atomic<std::size_t> next_task{0};
  std::mutex sink_mutex;  // serializes record persistence and counters
  std::string fatal_error;

  const auto record_failure = [&](const Task& task, const std::string& reason) {
    std::lock_guard<std::mutex> lock(sink_mutex);
    ++summary.failed;
    if (summary.failures.size() < 20)
      summary.failures.push_back(task.problem->id + "#" +
                                 std::to_string(task.sample_index) + ": " +
                                 reason);
  };

  const auto worker = [&]() {
    std::unique_ptr<ChatCompletionsClient> client;
    try {
      client = std::make_unique<ChatCompletionsClient>(endpoint);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(sink_mutex);
      if (fatal_error.empty()) fatal_error = e.what();
      return;
    }
    while (true) {
      const std::size_t index = next_task.fetch_add(1);
      if (index >= tasks.size()) return;
      const Task& task = tasks[index];

      std::string failure;
      try {
        std::string user = sampling.user_template;
        const std::size_t slot = user.find("{problem}");
        user.replace(slot, std::string("{problem}").size(),
                     task.problem->expression);
        std::vector<ChatCompletionsClient::Message> messages;
        if (sampling.system_prompt)
          messages.push_back({"system", *sampling.system_prompt});
        messages.push_back({"user", std::move(user)});

        for (int attempt = 1; attempt <= endpoint.retry_max_attempts; ++attempt) {
          try {
            const auto completion =
                client->complete(messages, sampling.temperature, sampling.top_p,
                                 sampling.max_tokens);
            ResponseRecord record;
            record.problem_id = task.problem->id;
            record.sample_index = task.sample_index;
            record.text = completion.text;
            record.completion_tokens = completion.completion_tokens;
            record.finish_reason =
                finish_reason_from_string(completion.finish_reason);
            record.model_label = endpoint.model_name;
            record.sampling = {sampling.temperature, sampling.top_p,
                               sampling.max_tokens};
            {
              std::lock_guard<std::mutex> lock(sink_mutex);
              store.append(record);
              manifest.completed.insert({record.problem_id, record.sample_index});
              ++summary.completed;
            }
            failure.clear();
            break;
          } catch (const TransportError& e) {
            failure = e.what();
            if (attempt < endpoint.retry_max_attempts) {
              const double backoff = endpoint.retry_base_backoff_seconds *
                                     static_cast<double>(1 << (attempt - 1));
              std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            }
          } catch (const std::exception& e) {
            failure = e.what();  // non-retryable
            break;
          }
        }
      } catch (const std::exception& e) {
        failure = e.what();
      }
      if (!failure.empty()) record_failure(task, failure);
    }
  };

  const int n_workers = static_cast<int>(
      std::min<std::size_t>(tasks.size(),
                            static_cast<std::size_t>(endpoint.max_concurrency)));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) workers.emplace_back(worker);
  for (std::thread& t : workers) t.join();
  if (summary.completed + summary.failed == 0 && !fatal_error.empty())
    throw Error(fatal_error);
  return summary;
}

HttpJudgeClient::HttpJudgeClient(const EndpointConfig& endpoint, int max_tokens)
    : client_(endpoint), max_tokens_(max_tokens) {}

std::string HttpJudgeClient::complete(const std::string& prompt) {
  try {
    return client_.complete({{"user", prompt}}, 0.0, 1.0, max_tokens_).text;
  } catch (const std::exception& e) {
    throw JudgeUnavailable(std::string("judge endpoint failed: ") + e.what());
  }
}

}  // namespace cotlab
