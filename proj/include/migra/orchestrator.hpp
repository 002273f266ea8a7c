#pragma once

#include "migra/coder.hpp"
#include "migra/memory_bank.hpp"
#include "migra/plan.hpp"
#include "migra/playbook.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

class CompletionProvider;
class Workspace;

enum class StrategyKind { PerStep, Fixed, FileCluster };

struct ChunkStrategy {
  StrategyKind kind = StrategyKind::PerStep;
  int k = 4;  // chunk size for fixed, cap for file_cluster

  // "per_step", "fixed(2)", "file_cluster(4)".
  std::string describe() const;
  // Inverse of describe(); "file_cluster" alone means k = 4.
  // Throws Error{InvalidStrategyParam}, Error{ConfigInvalid}.
  static ChunkStrategy parse(std::string_view text);
};

// Consecutive runs of plan steps, plan order preserved.
//  per_step      one step per chunk
//  fixed(k)      runs of k steps
//  file_cluster  a step joins the previous chunk when it shares a target file
//                with any step already there, up to k steps
// Throws Error{InvalidStrategyParam} for k < 1.
std::vector<SubStep> chunk_plan(const MigrationPlan& plan, const ChunkStrategy& strategy);

// Fires when a step of the sub-step has the keyword in its instructions or
// title (case-insensitive), or a target file under the prefix.
struct SelectionRule {
  std::optional<std::string> keyword;
  std::optional<std::string> target_prefix;
  PlaybookRef playbook;
};

// General and style playbooks are always selected. Task and client
// playbooks are selected when a rule naming them fires, or unconditionally
// when no rules are configured. Result follows set order.
// Throws Error{UnknownPlaybookInRule}.
std::vector<PlaybookRef> select_playbooks(const SubStep& substep, const MigrationPlan& plan, const PlaybookSet& set,
                                          const std::vector<SelectionRule>& rules);

enum class ExhaustionAction { Abort, Skip };

struct FailurePolicy {
  int max_retries = 2;
  ExhaustionAction on_exhaustion = ExhaustionAction::Abort;
  bool skip_cascade = true;
};

struct RunOptions {
  ChunkStrategy strategy;
  FailurePolicy policy;
  std::vector<SelectionRule> rules;
  CoderOptions coder;
  // Stop cleanly after this many chunk executions in this invocation, as if
  // the process had been interrupted.
  std::optional<std::size_t> stop_after_chunks;
};

enum class RunStatus { Completed, Aborted, Interrupted };
std::string_view to_string(RunStatus s) noexcept;

struct ChunkReport {
  std::size_t chunk_index = 0;
  std::vector<StepId> step_ids;
  StepStatus outcome = StepStatus::Pending;
  int attempts = 0;
  double wall_secs = 0.0;
};

struct RunReport {
  RunStatus status = RunStatus::Completed;
  std::map<StepId, StepStatus> step_status;
  std::map<StepId, int> attempts;
  std::vector<ChunkReport> chunks;  // chunks handled in this invocation
  std::size_t coder_invocations = 0;
  std::size_t next_chunk = 0;
};

// Starts a fresh run of `plan`, which must already be the bank's plan
// (Error{BankPlanMismatch}). Chunks run strictly one after another. State is
// written before each coder invocation (steps in_progress) and after it.
// Errors from the workspace or provider carry the chunk index.
RunReport run_migration(const MigrationPlan& plan, const Workspace& workspace, const PlaybookSet& playbooks,
                        CompletionProvider& provider, const MemoryBank& bank, const RunOptions& options = {});

// Continues from the bank's state. Steps found in_progress (a crash during
// the coder) are reset to pending and their interrupted attempt is not
// counted. When `expected_plan` is given its hash must match the bank's
// (Error{BankPlanMismatch}); the recomputed chunking must match the recorded
// one (Error{StrategyMismatch}).
RunReport resume_migration(const MemoryBank& bank, const Workspace& workspace, const PlaybookSet& playbooks,
                           CompletionProvider& provider, const RunOptions& options = {},
                           const MigrationPlan* expected_plan = nullptr);

}  // namespace migra
