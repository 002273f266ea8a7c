#pragma once

#include "migra/workspace.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace migra {

class CompletionProvider;

struct ChecklistSection {
  std::string heading;
  std::vector<std::size_t> items;  // global 1-based indices
};

struct Checklist {
  std::string title;
  std::vector<ChecklistSection> sections;
  std::vector<std::string> items;  // items[i] has index i + 1

  std::size_t size() const noexcept { return items.size(); }
};

// "# " title, "## " sections, "- [ ] " items. Items ahead of the first
// section land in an untitled section.
// Throws Error{NoItems}, Error{PreCheckedItem}, Error{MalformedCheckbox}.
Checklist parse_checklist(std::string_view markdown);

struct ItemVerdict {
  std::size_t index = 0;
  bool pass = false;
  std::string evidence;

  friend bool operator==(const ItemVerdict&, const ItemVerdict&) = default;
};

struct ChecklistVerdict {
  std::vector<ItemVerdict> items;  // sorted by index
  double score = 0.0;
};

// Parses the body of a ```verdict block: one "ITEM <n>: PASS|FAIL -- <evidence>"
// line per item, blank lines ignored, evidence mandatory.
// Throws Error{MalformedVerdict} (bad line, duplicate index),
// Error{UnknownItem} (index outside 1..item_count), Error{MissingItems}.
ChecklistVerdict parse_verdict(std::string_view block, std::size_t item_count);

// pass_count / N.
double score_verdict(const ChecklistVerdict& verdict) noexcept;

struct JudgeOptions {
  int max_iterations = 30;
  double temperature = 0.2;
  int run_index = 1;  // used in tags "judge.run.<r>.turn.<n>"
};

struct JudgeResult {
  ChecklistVerdict verdict;
  int iterations = 0;
  std::vector<std::pair<ToolCall, ToolResult>> tool_log;
};

// Blind audit: the judge sees the checklist and the target roots, and may
// only list, read and grep under those roots. Any other access is answered
// with ToolDenied before touching the filesystem. A malformed verdict gets
// one retry. Never writes anything.
// Throws Error{IterationBudgetExhausted}, verdict errors, provider errors.
JudgeResult judge_migration(const Checklist& checklist, const std::vector<std::string>& target_roots,
                            const Workspace& workspace, CompletionProvider& provider, const JudgeOptions& options = {});

}  // namespace migra
