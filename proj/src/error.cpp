#include "migra/error.hpp"

namespace migra {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::DuplicateStepId: return "DuplicateStepId";
    case ErrorCode::UnknownDependency: return "UnknownDependency";
    case ErrorCode::ForwardDependency: return "ForwardDependency";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::PathEscape: return "PathEscape";
    case ErrorCode::PathInvalid: return "PathInvalid";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ToolDenied: return "ToolDenied";
    case ErrorCode::NoSuchTool: return "NoSuchTool";
    case ErrorCode::MissingArg: return "MissingArg";
    case ErrorCode::InvalidPattern: return "InvalidPattern";
    case ErrorCode::CommandUnavailable: return "CommandUnavailable";
    case ErrorCode::CommandFailed: return "CommandFailed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::WorkspaceInvalid: return "WorkspaceInvalid";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::ContextBudgetExceeded: return "ContextBudgetExceeded";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::ScriptMismatch: return "ScriptMismatch";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::RemoteError: return "RemoteError";
    case ErrorCode::ResponseEmpty: return "ResponseEmpty";
    case ErrorCode::TranscriptInvalid: return "TranscriptInvalid";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyPlaybook: return "EmptyPlaybook";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownSelection: return "UnknownSelection";
    case ErrorCode::MalformedUnitsBlock: return "MalformedUnitsBlock";
    case ErrorCode::MalformedPlaybookBlock: return "MalformedPlaybookBlock";
    case ErrorCode::EmptyGoldenPair: return "EmptyGoldenPair";
    case ErrorCode::MissingPlanBlock: return "MissingPlanBlock";
    case ErrorCode::RepeatRequest: return "RepeatRequest";
    case ErrorCode::InvalidStrategyParam: return "InvalidStrategyParam";
    case ErrorCode::UnknownPlaybookInRule: return "UnknownPlaybookInRule";
    case ErrorCode::BankPlanMismatch: return "BankPlanMismatch";
    case ErrorCode::StrategyMismatch: return "StrategyMismatch";
    case ErrorCode::NonEmptyForeignDir: return "NonEmptyForeignDir";
    case ErrorCode::PlanMissing: return "PlanMissing";
    case ErrorCode::StateMissing: return "StateMissing";
    case ErrorCode::IndexGap: return "IndexGap";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::StateCorrupt: return "StateCorrupt";
    case ErrorCode::BankLocked: return "BankLocked";
    case ErrorCode::NoItems: return "NoItems";
    case ErrorCode::PreCheckedItem: return "PreCheckedItem";
    case ErrorCode::MalformedCheckbox: return "MalformedCheckbox";
    case ErrorCode::MalformedVerdict: return "MalformedVerdict";
    case ErrorCode::MissingItems: return "MissingItems";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::IterationBudgetExhausted: return "IterationBudgetExhausted";
    case ErrorCode::EmptyRuns: return "EmptyRuns";
    case ErrorCode::MisalignedModels: return "MisalignedModels";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::RunCompleted: return "RunCompleted";
    case ErrorCode::RunInProgress: return "RunInProgress";
    case ErrorCode::PlanExists: return "PlanExists";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void rethrow_with_context(const Error& e, const std::string& context) {
  std::string what = e.what();
  // Strip the "<Code>: " prefix so it is not repeated.
  const auto prefix = std::string(to_string(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  throw Error(e.code(), context + ": " + what);
}

}  // namespace migra
