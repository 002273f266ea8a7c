#pragma once

#include "migra/http_provider.hpp"
#include "migra/orchestrator.hpp"
#include "migra/playbook.hpp"
#include "migra/stats.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace migra {

struct ProviderConfig {
  enum class Kind { Scripted, Http };
  Kind kind = Kind::Scripted;
  std::filesystem::path script_path;                 // scripted
  HttpProviderConfig http;                           // http
  std::optional<std::filesystem::path> record_path;  // also append every exchange here
  double temperature = 0.2;
};

struct Limits {
  int max_rounds = 5;
  int max_iterations = 40;
  int judge_max_iterations = 30;
  std::size_t oversized_step_budget = 400;
  std::size_t context_char_budget = 400'000;
};

// Everything one migration needs. Relative paths in the file are resolved
// against the directory holding it.
struct EngineConfig {
  std::string name;  // configuration label used in score files
  std::filesystem::path workspace_root;
  std::optional<std::string> build_cmd;
  std::optional<std::string> test_cmd;
  int timeout_secs = 120;
  std::string root_file;    // workspace-relative main file
  std::string target_root;  // where migrated code goes, workspace-relative
  std::string source_ext = "py";
  ProviderConfig provider;
  std::optional<ProviderConfig> judge_provider;
  std::vector<PlaybookSource> playbooks;
  std::vector<SelectionRule> playbook_rules;
  std::vector<std::string> excluded_prefixes;
  std::vector<std::pair<std::string, std::string>> import_rules;  // (symbol prefix, import line)
  ChunkStrategy strategy;
  FailurePolicy failure_policy;
  std::filesystem::path bank_dir;
  Limits limits;
  ConfigFlags flags;
  int lock_stale_secs = 3600;
};

// Parses a config document. `overrides_json`, when non-empty, is a JSON
// object merge-patched over the document first. A "preset" naming one of
// the standard configurations sets `flags`; explicit "flags" entries win.
// Referenced paths must exist. Throws Error{ConfigInvalid}.
EngineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                          std::string_view overrides_json = {});
EngineConfig load_config(const std::filesystem::path& path, std::string_view overrides_json = {});

// The playbook sources the flags admit: general always, style and task with
// task_style_playbooks, client with client_playbook.
std::vector<PlaybookSource> active_playbook_sources(const EngineConfig& config);

class CompletionProvider;

// Builds the configured backend, wrapped in a recorder when record_path is
// set. The context budget from `limits` applies to every call.
std::unique_ptr<CompletionProvider> make_provider(const ProviderConfig& config, const Limits& limits);

}  // namespace migra
