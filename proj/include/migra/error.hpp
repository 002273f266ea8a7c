#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace migra {

// Every failure the engine can report. Tool-level failures that are fed back
// to an agent travel inside ToolResult instead of being thrown.
enum class ErrorCode {
  // plan documents
  MalformedDocument,
  EmptyPlan,
  InvalidStep,
  DuplicateStepId,
  UnknownDependency,
  ForwardDependency,
  CyclicDependency,
  // dependency discovery
  RootNotFound,
  // workspace / tools
  PathEscape,
  PathInvalid,
  FileNotFound,
  ToolDenied,
  NoSuchTool,
  MissingArg,
  InvalidPattern,
  CommandUnavailable,
  CommandFailed,
  Timeout,
  SpawnFailure,
  WorkspaceInvalid,
  // providers
  InvalidRequest,
  ContextBudgetExceeded,
  ScriptExhausted,
  ScriptMismatch,
  TransportError,
  RemoteError,
  ResponseEmpty,
  TranscriptInvalid,
  IoFailure,
  // playbooks
  EmptyPlaybook,
  DuplicateName,
  UnknownSelection,
  MalformedUnitsBlock,
  MalformedPlaybookBlock,
  EmptyGoldenPair,
  // planner
  MissingPlanBlock,
  RepeatRequest,
  // orchestrator
  InvalidStrategyParam,
  UnknownPlaybookInRule,
  BankPlanMismatch,
  StrategyMismatch,
  // memory bank
  NonEmptyForeignDir,
  PlanMissing,
  StateMissing,
  IndexGap,
  HashMismatch,
  StateCorrupt,
  BankLocked,
  // judge / statistics
  NoItems,
  PreCheckedItem,
  MalformedCheckbox,
  MalformedVerdict,
  MissingItems,
  UnknownItem,
  IterationBudgetExhausted,
  EmptyRuns,
  MisalignedModels,
  ZeroVariance,
  TooFewPairs,
  // cli / config
  ConfigInvalid,
  RunCompleted,
  RunInProgress,
  PlanExists,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Re-throws `e` with `context` prepended to its message, keeping the code.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace migra
