#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;
std::optional<Role> parse_role(std::string_view name) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
  std::optional<int> max_tokens;
  std::string tag;  // transcript label, e.g. "planner.round.2"
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct CompletionResponse {
  std::string content;
  std::optional<Usage> usage;
};

// Throws Error{InvalidRequest}: no messages, a system message other than the
// first, empty system/user content, temperature outside [0, 2], or
// non-positive max_tokens.
void validate_request(const CompletionRequest& request);

// Total characters across all message contents.
std::size_t request_chars(const CompletionRequest& request) noexcept;

// The single seam between the engine and a language model. Implementations
// must tolerate concurrent complete() calls.
class CompletionProvider {
 public:
  static constexpr std::size_t kDefaultContextCharBudget = 400'000;

  virtual ~CompletionProvider() = default;

  // Validates the request and enforces the context budget (Error
  // {ContextBudgetExceeded}; requests are never truncated), then delegates.
  CompletionResponse complete(const CompletionRequest& request);

  void set_context_char_budget(std::size_t chars) noexcept { budget_ = chars; }
  std::size_t context_char_budget() const noexcept { return budget_; }

 protected:
  virtual CompletionResponse do_complete(const CompletionRequest& request) = 0;

 private:
  std::size_t budget_ = kDefaultContextCharBudget;
};

// --- transcripts -----------------------------------------------------------

struct TranscriptEntry {
  std::string tag;
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
  std::string response;
};

// Sequence: entries are consumed in order whatever the request.
// Tag: the first unconsumed entry whose tag equals the request tag.
enum class ScriptMode { Sequence, Tag };

struct Transcript {
  ScriptMode mode = ScriptMode::Sequence;
  std::vector<TranscriptEntry> entries;
};

// Accepts a bare JSON array of entries (sequence mode) or an object
// {"mode": "sequence"|"tag", "entries": [...]}. In scripts, `messages` and
// `temperature` may be omitted. Throws Error{TranscriptInvalid}.
Transcript parse_transcript(std::string_view text);
Transcript load_transcript(const std::filesystem::path& path);

// Bare JSON array form, as written by record_transcript.
std::string serialize_transcript(const std::vector<TranscriptEntry>& entries);

// Appends one {tag, messages, temperature, response} entry; the file is a
// valid transcript after every append. Throws Error{IoFailure}.
void record_transcript(const std::filesystem::path& sink, const CompletionRequest& request,
                       const CompletionResponse& response);

// --- backends --------------------------------------------------------------

// Replays canned responses. Bit-deterministic; temperature is ignored.
class ScriptedProvider : public CompletionProvider {
 public:
  explicit ScriptedProvider(Transcript script);

  // Throws Error{ScriptExhausted} or Error{ScriptMismatch}.
  std::string scripted_lookup(const CompletionRequest& request);

  std::size_t consumed() const;
  std::size_t remaining() const;

 protected:
  CompletionResponse do_complete(const CompletionRequest& request) override;

 private:
  Transcript script_;
  std::vector<bool> used_;
  std::size_t cursor_ = 0;
  mutable std::mutex mutex_;
};

// Decorator that reports every completed exchange to a sink (transcript file,
// memory bank, test probe). The inner provider's budget still applies.
class RecordingProvider : public CompletionProvider {
 public:
  using Sink = std::function<void(const CompletionRequest&, const CompletionResponse&)>;

  RecordingProvider(CompletionProvider& inner, Sink sink);

 protected:
  CompletionResponse do_complete(const CompletionRequest& request) override;

 private:
  CompletionProvider& inner_;
  Sink sink_;
  std::mutex mutex_;
};

// Sink that appends every exchange to one transcript file.
RecordingProvider::Sink transcript_file_sink(std::filesystem::path path);

}  // namespace migra
