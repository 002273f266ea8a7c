#pragma once

#include "migra/provider.hpp"

#include <functional>
#include <optional>
#include <string>

namespace migra {

struct HttpProviderConfig {
  // Full URL of a chat-completions endpoint, e.g.
  // "https://api.example.com/v1/chat/completions".
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the bearer token; none sends no
  // Authorization header.
  std::optional<std::string> token_env;
  int max_attempts = 3;
  double backoff_initial_secs = 1.0;  // doubled after each failed attempt
  int timeout_secs = 300;
};

// Speaks the de-facto chat-completions wire format:
//   POST {"model", "messages": [{"role", "content"}], "temperature"[, "max_tokens"]}
//   <- {"choices": [{"message": {"content": ...}}], "usage": {...}}
// Transport failures, 429 and 5xx responses are retried with exponential
// backoff; other statuses fail immediately with RemoteError.
class HttpProvider : public CompletionProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  // Replaces the sleep used between retries (tests).
  void set_sleeper(std::function<void(double)> sleeper) { sleeper_ = std::move(sleeper); }

 protected:
  CompletionResponse do_complete(const CompletionRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::function<void(double)> sleeper_;
};

}  // namespace migra
