#pragma once

#include "migra/config.hpp"
#include "migra/plan.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace migra {

class Workspace;

// JSON report of one command. `success` is false when the command ran but the
// migration did not finish with every step done.
struct CommandResult {
  std::string json;
  bool success = true;
};

struct RunRequest {
  bool force = false;  // restart even if a run exists or finished
  std::optional<std::size_t> stop_after_chunks;
};

struct JudgeRequest {
  std::filesystem::path checklist;
  std::vector<std::string> targets;  // empty: the configured target_root
  int runs = 1;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> model;  // default: stem of root_file
  bool append = false;
};

struct PlaybookGenRequest {
  std::vector<std::pair<std::string, std::string>> golden;  // (legacy dir, migrated dir)
  std::optional<std::filesystem::path> out;
  bool review = false;  // without it the playbook is only returned
  std::string name = "generated";
};

struct CompareRequest {
  std::filesystem::path a;
  std::filesystem::path b;
  std::optional<std::string> a_config;
  std::optional<std::string> b_config;
};

// The commands behind the CLI, bound to one configuration. Each command
// builds its own provider from the config, so scripted transcripts meant to
// span several commands should be in tag mode.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  const EngineConfig& config() const noexcept { return config_; }
  void set_force_unlock(bool force) noexcept { force_unlock_ = force; }

  // Plans from the root file (or `root_override`) and stores plan.json and
  // plan.dot. Replacing a stored plan needs `overwrite` (Error{PlanExists});
  // a plan that differs from the stored one discards run state. Without
  // planner/orchestrator the single-step baseline plan is stored.
  CommandResult plan(const std::optional<std::string>& root_override = std::nullopt, bool overwrite = false);

  // Fresh run of the stored plan. Throws Error{PlanMissing} when the bank
  // has no plan (not needed in single-agent mode), Error{RunCompleted} or
  // Error{RunInProgress} when a run exists and `force` is not set.
  CommandResult run(const RunRequest& request = {});
  CommandResult resume(const RunRequest& request = {});

  CommandResult judge(const JudgeRequest& request);
  CommandResult playbook_generate(const PlaybookGenRequest& request);
  CommandResult viz(const std::optional<std::filesystem::path>& out);

  static CommandResult eval_compare(const CompareRequest& request);

  Workspace make_workspace() const;
  // The one-step plan used when planner and orchestrator are disabled.
  MigrationPlan single_agent_plan(const Workspace& workspace) const;

 private:
  EngineConfig config_;
  bool force_unlock_ = false;
};

}  // namespace migra
