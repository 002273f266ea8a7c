#pragma once

#include "migra/depgraph.hpp"
#include "migra/plan.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

class CompletionProvider;
class MemoryBank;
class PlaybookSet;
class Workspace;

struct PlannerRoundResult {
  std::string plan_text;                     // content of the ```plan block
  std::vector<std::string> requested_files;  // ```requests block, one path per line
  int round_index = 1;

  bool converged() const noexcept { return requested_files.empty(); }
};

struct PlannerOptions {
  int max_rounds = 5;
  std::vector<std::string> excluded_prefixes;
  ImportOptions imports;
  double temperature = 0.2;
};

// Everything one planning round shows the model besides the file contents.
struct PlannerRoundInput {
  std::string root_file;
  MigrationOrder order;
  std::vector<std::string> externals;
  // Requests refused in the previous round, with the reason.
  std::vector<std::pair<std::string, std::string>> refused;
};

// One planner call tagged "planner.round.<round_index>". A reply without a
// ```requests block has converged. Throws Error{MissingPlanBlock},
// Error{RepeatRequest} (a requested path is already in `context_files`).
PlannerRoundResult plan_round(const std::map<std::string, std::string>& context_files, const PlannerRoundInput& input,
                              const PlaybookSet& playbooks, CompletionProvider& provider, int round_index,
                              const PlannerOptions& options = {});

struct PlanningResult {
  MigrationPlan plan;
  int rounds = 0;
  bool gaps_remaining = false;  // max_rounds reached with requests pending
  std::vector<LintFinding> findings;
};

// Recursive planning from `root_file`: round 1 sees the root and its direct
// workspace imports, every later round adds the files the model asked for.
// Stops on convergence or after max_rounds (keeping the last plan). Files
// under excluded prefixes are listed as available but never supplied. The
// final plan is parsed, validated and, when `bank` is given, saved with its
// dot rendering. Plan errors carry the round index.
PlanningResult plan_migration(std::string_view root_file, const Workspace& workspace, const PlaybookSet& playbooks,
                              CompletionProvider& provider, const PlannerOptions& options = {},
                              const MemoryBank* bank = nullptr);

}  // namespace migra
