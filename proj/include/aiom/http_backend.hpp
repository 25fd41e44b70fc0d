// Copyright 2026 The aiom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Live model endpoint speaking the chat-completions protocol:
//   POST {endpoint}/v1/chat/completions
//   {"model": m, "messages": [{"role": "user", "content": <rendered prompt>}], "temperature": t}
// The answer is choices[0].message.content.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>

#include "aiom/backends.hpp"

namespace aiom {

struct HttpBackendConfig {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{30000};
  std::string api_key_env = "AIOM_API_KEY";
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};

  static HttpBackendConfig from_params(const Json& params) {
    constexpr std::string_view what = "http backend params";
    detail::check_keys(params, what,
                       {"endpoint", "model", "temperature", "timeout_ms", "api_key_env",
                        "max_attempts", "backoff_ms"});
    HttpBackendConfig c;
    c.endpoint = detail::optional_field<std::string>(params, "endpoint", "", what);
    c.model = detail::required<std::string>(params, "model", what);
    c.temperature = detail::optional_field<double>(params, "temperature", 0.0, what);
    c.timeout = std::chrono::milliseconds(detail::optional_field<long>(params, "timeout_ms", 30000, what));
    c.api_key_env = detail::optional_field<std::string>(params, "api_key_env", "AIOM_API_KEY", what);
    c.max_attempts = detail::optional_field<int>(params, "max_attempts", 3, what);
    c.backoff = std::chrono::milliseconds(detail::optional_field<long>(params, "backoff_ms", 500, what));
    return c;
  }
};

/// Splits an absolute http(s) URL into "scheme://host[:port]" and a path prefix
/// without a trailing slash. Throws ConfigurationError on anything else.
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigurationError("http backend: endpoint \"" + url + "\" is not an absolute URL");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigurationError("http backend: unsupported scheme \"" + scheme + "\"");
  }
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  std::string origin = url.substr(0, path_begin);
  if (origin.size() <= host_begin) {
    throw ConfigurationError("http backend: endpoint \"" + url + "\" has no host");
  }
  std::string prefix = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::move(origin), std::move(prefix)};
}

class HttpBackend final : public Backend {
 public:
  HttpBackend(std::string id, HttpBackendConfig config)
      : id_(std::move(id)), config_(std::move(config)) {
    if (const char* env = std::getenv("AIOM_ENDPOINT"); env && *env) config_.endpoint = env;
    if (config_.endpoint.empty()) {
      throw ConfigurationError("http backend: no endpoint configured (set \"endpoint\" or AIOM_ENDPOINT)");
    }
    std::tie(origin_, prefix_) = split_endpoint(config_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.starts_with("https://")) {
      throw ConfigurationError("http backend: built without TLS support, cannot use " + origin_);
    }
#endif
    if (!std::isfinite(config_.temperature) || config_.temperature < 0.0 ||
        config_.temperature > 2.0) {
      throw ConfigurationError("http backend: temperature must be in [0, 2]");
    }
    if (config_.max_attempts < 1) throw ConfigurationError("http backend: max_attempts must be >= 1");
    if (config_.timeout.count() <= 0) throw ConfigurationError("http backend: timeout must be positive");
  }

  const std::string& id() const noexcept override { return id_; }
  bool blocking() const noexcept override { return true; }
  const HttpBackendConfig& config() const noexcept { return config_; }

  std::string request_body(const Prompt& prompt) const {
    Json body = {{"model", config_.model},
                 {"messages", Json::array({Json{{"role", "user"}, {"content", prompt.rendered_text}}})},
                 {"temperature", config_.temperature}};
    return body.dump(-1, ' ', false, Json::error_handler_t::replace);
  }

  Answer query(const Prompt& prompt, const QueryContext& context) const override {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request_body(prompt);
    const std::string path = prefix_ + "/v1/chat/completions";
    const auto started = std::chrono::steady_clock::now();

    for (int attempt = 1;; ++attempt) {
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        throw BackendError("http backend \"" + id_ + "\": request failed (" +
                           httplib::to_string(res.error()) + ")");
      }
      const int status = res->status;
      if (status >= 200 && status < 300) {
        Answer answer = parse_response(res->body, context);
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        answer.meta["latency_ms"] = std::to_string(elapsed.count());
        answer.meta["attempts"] = std::to_string(attempt);
        return answer;
      }
      const bool retryable = status == 429 || status >= 500;
      if (!retryable || attempt >= config_.max_attempts) {
        throw BackendError("http backend \"" + id_ + "\": HTTP " + std::to_string(status) +
                               " after " + std::to_string(attempt) + " attempt(s)",
                           retryable);
      }
      std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    }
  }

 private:
  Answer parse_response(const std::string& raw, const QueryContext& context) const {
    auto doc = Json::parse(raw, nullptr, false);
    const Json* content = nullptr;
    if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() &&
        !doc["choices"].empty()) {
      const auto& choice = doc["choices"][0];
      if (choice.is_object() && choice.contains("message") && choice["message"].is_object()) {
        auto it = choice["message"].find("content");
        if (it != choice["message"].end() && it->is_string()) content = &*it;
      }
    }
    if (!content) throw BackendError("http backend \"" + id_ + "\": malformed response body");
    Answer answer{context.task_id, content->get<std::string>(), id_, {}};
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
      for (const char* key : {"prompt_tokens", "completion_tokens", "total_tokens"}) {
        if (auto v = usage->find(key); v != usage->end() && v->is_number_integer()) {
          answer.meta[key] = std::to_string(v->get<long long>());
        }
      }
    }
    return answer;
  }

  std::string id_;
  HttpBackendConfig config_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace aiom
