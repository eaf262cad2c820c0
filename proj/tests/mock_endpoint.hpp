// Instrumented in-process chat-completions endpoint for harness tests.
// Replies deterministically from the prompt text, counts requests and tracks
// the in-flight high-water mark.
#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "cotlab/rng.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

namespace mock_endpoint {

class MockServer {
 public:
  MockServer() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handle(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
  }

  static std::string reply_for(const std::string& prompt) {
    return "The final answer is \\boxed{" +
           std::to_string(cotlab::fnv64(prompt) % 997) + "}.";
  }

  std::atomic<int> total_requests{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::atomic<bool> fail_everything{false};
  std::atomic<bool> fail_first_attempt{false};
  std::atomic<bool> garbage_json{false};

  std::string last_auth_header() {
    std::lock_guard<std::mutex> lock(mutex_);
    return last_auth_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++total_requests;
    const int now = ++in_flight;
    int seen = max_in_flight.load();
    while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(3));

    {
      std::lock_guard<std::mutex> lock(mutex_);
      last_auth_ = req.get_header_value("Authorization");
    }

    const nlohmann::json body = nlohmann::json::parse(req.body);
    const std::string prompt =
        body.at("messages").back().at("content").get<std::string>();

    if (fail_everything) {
      res.status = 500;
      --in_flight;
      return;
    }
    if (fail_first_attempt) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (attempts_[prompt]++ == 0) {
        res.status = 503;
        --in_flight;
        return;
      }
    }
    if (garbage_json) {
      res.set_content("this is not json", "text/plain");
      --in_flight;
      return;
    }

    const bool truncated = prompt.find("__LENGTH__") != std::string::npos;
    nlohmann::json choice;
    choice["message"] = {{"role", "assistant"}, {"content", reply_for(prompt)}};
    choice["finish_reason"] = truncated ? "length" : "stop";
    nlohmann::json reply;
    reply["choices"] = nlohmann::json::array({choice});
    reply["usage"] = {{"completion_tokens", 42}, {"prompt_tokens", 10}};
    res.set_content(reply.dump(), "application/json");
    --in_flight;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::string last_auth_;
  std::map<std::string, int> attempts_;
};

}  // namespace mock_endpoint
