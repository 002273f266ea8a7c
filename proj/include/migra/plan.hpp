#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

class Workspace;

using StepId = std::int64_t;

// One unit of migration work handed to the coder.
struct PlanStep {
  StepId step_id = 0;
  std::string title;
  std::vector<std::string> source_files;  // may be empty (scaffolding steps)
  std::vector<std::string> target_files;  // never empty
  std::string instructions;
  std::string validation;
  std::vector<StepId> dependencies;  // each refers to an earlier step

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

// A validated plan. Immutable after construction; construct through
// parse_plan() or MigrationPlan::from_steps(), both of which enforce every
// invariant (unique ids, dependencies precede dependents, no cycles).
class MigrationPlan {
 public:
  static MigrationPlan from_steps(std::vector<PlanStep> steps);

  const std::vector<PlanStep>& steps() const noexcept { return steps_; }
  const std::string& plan_hash() const noexcept { return hash_; }
  const PlanStep& step(StepId id) const;
  bool contains(StepId id) const noexcept;

  friend bool operator==(const MigrationPlan& a, const MigrationPlan& b) { return a.steps_ == b.steps_; }

 private:
  std::vector<PlanStep> steps_;
  std::string hash_;
};

// Parses a plan document. Throws Error with one of MalformedDocument,
// EmptyPlan, InvalidStep, DuplicateStepId, UnknownDependency,
// CyclicDependency, ForwardDependency.
MigrationPlan parse_plan(std::string_view text);

// Canonical form: keys in the order step_id, title, source_files,
// target_files, instructions, validation, dependencies; two-space indent;
// UTF-8; trailing newline.
std::string serialize_plan(const MigrationPlan& plan);
std::string serialize_steps(const std::vector<PlanStep>& steps);

enum class Severity { Warning, Error };
enum class LintCode { MissingSource, OversizedStep, EmptyInstructions, OrphanStep };

std::string_view to_string(Severity s) noexcept;
std::string_view to_string(LintCode c) noexcept;

struct LintFinding {
  std::optional<StepId> step_id;  // none = plan-level
  Severity severity = Severity::Warning;
  LintCode code = LintCode::MissingSource;
  std::string message;

  friend bool operator==(const LintFinding&, const LintFinding&) = default;
};

struct LintOptions {
  std::size_t oversized_budget = 400;  // total source lines per step
  std::vector<std::string> excluded_prefixes;
};

// Findings ordered by (step_id, code). Never modifies plan or workspace.
std::vector<LintFinding> validate_plan(const MigrationPlan& plan, const Workspace& workspace,
                                       const LintOptions& options = {});

// Graphviz digraph: one node per step labeled "<id>: <title>", one edge
// dep -> dependent per dependency. Byte-deterministic.
std::string render_plan_dot(const MigrationPlan& plan);

}  // namespace migra
