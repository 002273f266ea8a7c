#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

class CompletionProvider;
class Workspace;

// Tiers, in system-prompt order: repository mechanics, coding conventions,
// migration-specific rules, team-specific rules distilled from golden
// examples.
enum class PlaybookKind { General = 0, Style = 1, Task = 2, Client = 3 };

std::string_view to_string(PlaybookKind kind) noexcept;
std::optional<PlaybookKind> parse_playbook_kind(std::string_view name) noexcept;

struct Playbook {
  PlaybookKind kind = PlaybookKind::General;
  std::string name;
  std::string body;     // markdown, verbatim
  std::string version;  // sha256 of body

  // Throws Error{EmptyPlaybook} for a blank body.
  static Playbook make(PlaybookKind kind, std::string name, std::string body);
};

struct PlaybookRef {
  PlaybookKind kind = PlaybookKind::General;
  std::string name;

  auto operator<=>(const PlaybookRef&) const = default;
  bool operator==(const PlaybookRef&) const = default;
};

std::string to_string(const PlaybookRef& ref);
// "client/yt" -> {Client, "yt"}; nullopt when malformed.
std::optional<PlaybookRef> parse_playbook_ref(std::string_view text);

// Ordered general, style, task, client; load order within a kind. At most
// one playbook per (kind, name).
class PlaybookSet {
 public:
  PlaybookSet() = default;
  // Throws Error{DuplicateName}.
  explicit PlaybookSet(std::vector<Playbook> playbooks);

  const std::vector<Playbook>& playbooks() const noexcept { return playbooks_; }
  const Playbook* find(const PlaybookRef& ref) const noexcept;
  bool empty() const noexcept { return playbooks_.empty(); }
  std::vector<PlaybookRef> refs() const;
  std::vector<PlaybookRef> refs_of(PlaybookKind kind) const;

  // Changes whenever any member's kind, name or body changes.
  std::string digest() const;

  // Members whose kind is in `kinds`, order preserved.
  PlaybookSet only(const std::vector<PlaybookKind>& kinds) const;

 private:
  std::vector<Playbook> playbooks_;
};

struct PlaybookSource {
  PlaybookKind kind = PlaybookKind::General;
  std::string name;  // empty: derived from the file stem
  std::filesystem::path path;
};

// Throws Error{FileNotFound}, Error{EmptyPlaybook}, Error{DuplicateName}.
PlaybookSet load_set(const std::vector<PlaybookSource>& sources);

// Selected bodies in set order, each introduced by "## PLAYBOOK: <kind>/<name>"
// and separated by one blank line. No selection = every member; an explicit
// empty selection yields "". Throws Error{UnknownSelection}.
std::string assemble_system_prompt(const PlaybookSet& set,
                                   const std::optional<std::vector<PlaybookRef>>& selection = std::nullopt);

// A completed human migration: legacy tree and migrated tree, both
// workspace-relative directories.
struct GoldenPair {
  std::string source_root;
  std::string target_root;
  std::string label;
};

struct ClientPlaybookOptions {
  std::string name = "client";
  double temperature = 0.2;
};

// Two-round distillation: one "playbook.decompose.<label>" call per pair that
// must answer with a ```units block (JSON array of {"unit", "source",
// "target"}), then one "playbook.summarize" call over all units that must
// answer with a ```playbook block. Makes exactly pairs.size() + 1 calls on
// success. The result is emitted for offline human review, never installed.
Playbook generate_client_playbook(const std::vector<GoldenPair>& pairs, CompletionProvider& provider,
                                  const Workspace& workspace, const ClientPlaybookOptions& options = {});

}  // namespace migra
