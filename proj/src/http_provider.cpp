#include "migra/http_provider.hpp"

#include "migra/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace migra {

using json = nlohmann::ordered_json;

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigInvalid, "endpoint must be an absolute http(s) URL: " + config_.endpoint);
  }
  const auto scheme = config_.endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::ConfigInvalid, "unsupported endpoint scheme: " + scheme);
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  base_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.max_attempts < 1) config_.max_attempts = 1;
  sleeper_ = [](double secs) { std::this_thread::sleep_for(std::chrono::duration<double>(secs)); };
}

CompletionResponse HttpProvider::do_complete(const CompletionRequest& request) {
  json body;
  body["model"] = config_.model;
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = request.temperature;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (config_.token_env) {
    const char* token = std::getenv(config_.token_env->c_str());
    if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  double backoff = config_.backoff_initial_secs;
  std::string last_error;
  ErrorCode last_code = ErrorCode::TransportError;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      sleeper_(backoff);
      backoff *= 2.0;
    }
    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(std::chrono::seconds(config_.timeout_secs));
    client.set_write_timeout(std::chrono::seconds(config_.timeout_secs));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_code = ErrorCode::TransportError;
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_code = ErrorCode::RemoteError;
      last_error = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::RemoteError, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::RemoteError, "response is not JSON: " + res->body.substr(0, 200));
    }
    const json* content = nullptr;
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
      const auto& first = doc["choices"][0];
      if (first.contains("message") && first["message"].contains("content")) content = &first["message"]["content"];
    }
    if (!content || !content->is_string()) throw Error(ErrorCode::ResponseEmpty, "response carries no message content");
    CompletionResponse out{content->get<std::string>(), std::nullopt};
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const auto& u = doc["usage"];
      out.usage = Usage{u.value("prompt_tokens", 0), u.value("completion_tokens", 0)};
    }
    return out;
  }
  throw Error(last_code, last_error + " (after " + std::to_string(config_.max_attempts) + " attempts)");
}

}  // namespace migra
