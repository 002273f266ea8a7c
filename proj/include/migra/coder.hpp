#pragma once

#include "migra/plan.hpp"
#include "migra/playbook.hpp"

#include <optional>
#include <string>
#include <vector>

namespace migra {

class CompletionProvider;
class Workspace;

// One or more consecutive plan steps delegated to a single coder invocation.
struct SubStep {
  std::size_t chunk_index = 0;
  std::vector<StepId> step_ids;
  std::vector<PlaybookRef> playbook_selection;

  friend bool operator==(const SubStep&, const SubStep&) = default;
};

struct CoderContext {
  std::string system_prompt;
  SubStep substep;
  std::vector<PlanStep> steps;                // full bodies of substep.step_ids
  std::vector<std::string> prior_summaries;   // every earlier summary, oldest first
  int attempt = 1;
  std::string retry_note;                     // failure output of the previous attempt
};

enum class CoderStatus { Success, Failure };

struct CoderOutcome {
  CoderStatus status = CoderStatus::Failure;
  std::string summary;         // success only
  std::string failure_reason;  // failure only
  std::vector<std::string> files_changed;
  bool build_ok = false;
  std::optional<bool> test_ok;
  int iterations_used = 0;
  int done_emissions = 0;  // every reply carrying a ```done block
  int accepted_dones = 0;  // those that passed the build gate
  int review_prompts = 0;
};

struct CoderOptions {
  int max_iterations = 40;
  double temperature = 0.2;
};

// Fixed texts injected into the conversation. Exposed so tests can count them
// in recorded transcripts.
extern const char* const kBuildGateReminder;
extern const char* const kReviewPromptHeader;
extern const char* const kFormatReminder;

// ReAct loop for one sub-step. Every provider call is one iteration and is
// tagged "coder.chunk.<c>.attempt.<a>.<kind>.<n>" with kind turn, review or
// summary.
//
//  - ```tool {"tool": ..., "args": {...}}: dispatched, result returned as the
//    next user message. Only the first tool block of a reply runs.
//  - ```done: accepted only after a passing run_build that follows the last
//    edit; otherwise the build-gate reminder is injected. An accepted done
//    gets exactly one review prompt listing the steps' validation conditions.
//  - review reply ```confirmed passes, a ```tool block resumes work.
//  - after the review passes a ```summary block with "Changes Made" and
//    "Key Fixes & Learnings" sections is required (one retry).
//  - ```abort ends the sub-step as a failure.
// Budget exhaustion is a failure outcome, not an exception. Provider and
// workspace errors propagate.
CoderOutcome execute_substep(const CoderContext& ctx, const Workspace& workspace, CompletionProvider& provider,
                             const CoderOptions& options = {});

// True when `body` names both required summary sections.
bool summary_has_sections(std::string_view body) noexcept;

}  // namespace migra
