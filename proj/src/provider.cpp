#include "migra/provider.hpp"

#include "migra/error.hpp"
#include "migra/fs_util.hpp"

#include <json.hpp>

namespace migra {

using json = nlohmann::ordered_json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view name) noexcept {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  return std::nullopt;
}

void validate_request(const CompletionRequest& request) {
  if (request.messages.empty()) throw Error(ErrorCode::InvalidRequest, "request has no messages");
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    const auto& m = request.messages[i];
    if (m.role == Role::System && i != 0) {
      throw Error(ErrorCode::InvalidRequest, "system message must be first and unique");
    }
    if (m.role != Role::Assistant && m.content.empty()) {
      throw Error(ErrorCode::InvalidRequest, std::string(to_string(m.role)) + " message content is empty");
    }
  }
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidRequest, "temperature must lie in [0, 2]");
  }
  if (request.max_tokens && *request.max_tokens <= 0) {
    throw Error(ErrorCode::InvalidRequest, "max_tokens must be positive");
  }
}

std::size_t request_chars(const CompletionRequest& request) noexcept {
  std::size_t n = 0;
  for (const auto& m : request.messages) n += m.content.size();
  return n;
}

CompletionResponse CompletionProvider::complete(const CompletionRequest& request) {
  validate_request(request);
  const auto chars = request_chars(request);
  if (chars > budget_) {
    throw Error(ErrorCode::ContextBudgetExceeded, "request '" + request.tag + "' has " + std::to_string(chars) +
                                                      " characters, budget is " + std::to_string(budget_));
  }
  return do_complete(request);
}

// --- transcripts -----------------------------------------------------------

namespace {

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr;
}

TranscriptEntry entry_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::TranscriptInvalid, "transcript entry must be an object");
  TranscriptEntry e;
  if (auto it = j.find("tag"); it != j.end()) {
    if (!it->is_string()) throw Error(ErrorCode::TranscriptInvalid, "'tag' must be a string");
    e.tag = it->get<std::string>();
  }
  auto resp = j.find("response");
  if (resp == j.end() || !resp->is_string()) {
    throw Error(ErrorCode::TranscriptInvalid, "entry '" + e.tag + "' needs a string 'response'");
  }
  e.response = resp->get<std::string>();
  if (auto it = j.find("temperature"); it != j.end()) {
    if (!it->is_number()) throw Error(ErrorCode::TranscriptInvalid, "'temperature' must be a number");
    e.temperature = it->get<double>();
  }
  if (auto it = j.find("messages"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::TranscriptInvalid, "'messages' must be an array");
    for (const auto& m : *it) {
      if (!m.is_object() || !m.contains("role") || !m.contains("content") || !m["role"].is_string() ||
          !m["content"].is_string()) {
        throw Error(ErrorCode::TranscriptInvalid, "message needs string 'role' and 'content'");
      }
      auto role = parse_role(m["role"].get<std::string>());
      if (!role) throw Error(ErrorCode::TranscriptInvalid, "unknown role " + m["role"].get<std::string>());
      e.messages.push_back({*role, m["content"].get<std::string>()});
    }
  }
  return e;
}

json entry_to_json(const TranscriptEntry& e) {
  json j;
  j["tag"] = e.tag;
  j["messages"] = messages_to_json(e.messages);
  j["temperature"] = e.temperature;
  j["response"] = e.response;
  return j;
}

}  // namespace

Transcript parse_transcript(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TranscriptInvalid, std::string("invalid JSON: ") + e.what());
  }
  Transcript t;
  const json* entries = &doc;
  if (doc.is_object()) {
    auto mode = doc.find("mode");
    if (mode != doc.end()) {
      if (*mode == "tag") t.mode = ScriptMode::Tag;
      else if (*mode == "sequence") t.mode = ScriptMode::Sequence;
      else throw Error(ErrorCode::TranscriptInvalid, "mode must be 'sequence' or 'tag'");
    }
    auto it = doc.find("entries");
    if (it == doc.end()) throw Error(ErrorCode::TranscriptInvalid, "transcript object needs 'entries'");
    entries = &*it;
  }
  if (!entries->is_array()) throw Error(ErrorCode::TranscriptInvalid, "transcript entries must be an array");
  for (const auto& e : *entries) t.entries.push_back(entry_from_json(e));
  return t;
}

Transcript load_transcript(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::TranscriptInvalid, std::string("cannot load transcript: ") + e.what());
  }
  return parse_transcript(text);
}

std::string serialize_transcript(const std::vector<TranscriptEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back(entry_to_json(e));
  return arr.dump(2) + "\n";
}

void record_transcript(const std::filesystem::path& sink, const CompletionRequest& request,
                       const CompletionResponse& response) {
  std::vector<TranscriptEntry> entries;
  std::error_code ec;
  if (std::filesystem::exists(sink, ec)) {
    try {
      entries = parse_transcript(read_text_file(sink)).entries;
    } catch (const Error& e) {
      throw Error(ErrorCode::IoFailure, "existing transcript unreadable: " + sink.string() + ": " + e.what());
    }
  }
  entries.push_back({request.tag, request.messages, request.temperature, response.content});
  atomic_write_file(sink, serialize_transcript(entries));
}

// --- scripted --------------------------------------------------------------

ScriptedProvider::ScriptedProvider(Transcript script)
    : script_(std::move(script)), used_(script_.entries.size(), false) {}

std::string ScriptedProvider::scripted_lookup(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  if (script_.mode == ScriptMode::Sequence) {
    if (cursor_ >= script_.entries.size()) {
      throw Error(ErrorCode::ScriptExhausted, "no scripted response left for '" + request.tag + "'");
    }
    used_[cursor_] = true;
    return script_.entries[cursor_++].response;
  }
  bool any_left = false;
  for (std::size_t i = 0; i < script_.entries.size(); ++i) {
    if (used_[i]) continue;
    any_left = true;
    if (script_.entries[i].tag == request.tag) {
      used_[i] = true;
      ++cursor_;
      return script_.entries[i].response;
    }
  }
  if (!any_left) throw Error(ErrorCode::ScriptExhausted, "no scripted response left for '" + request.tag + "'");
  throw Error(ErrorCode::ScriptMismatch, "no unconsumed scripted entry tagged '" + request.tag + "'");
}

CompletionResponse ScriptedProvider::do_complete(const CompletionRequest& request) {
  return {scripted_lookup(request), std::nullopt};
}

std::size_t ScriptedProvider::consumed() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mutex_);
  return script_.entries.size() - cursor_;
}

// --- recording -------------------------------------------------------------

RecordingProvider::RecordingProvider(CompletionProvider& inner, Sink sink) : inner_(inner), sink_(std::move(sink)) {
  set_context_char_budget(inner.context_char_budget());
}

CompletionResponse RecordingProvider::do_complete(const CompletionRequest& request) {
  auto response = inner_.complete(request);
  std::lock_guard lock(mutex_);
  if (sink_) sink_(request, response);
  return response;
}

RecordingProvider::Sink transcript_file_sink(std::filesystem::path path) {
  return [path = std::move(path)](const CompletionRequest& req, const CompletionResponse& resp) {
    record_transcript(path, req, resp);
  };
}

}  // namespace migra
