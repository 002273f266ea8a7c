#pragma once

#include "migra/plan.hpp"
#include "migra/provider.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

class PlaybookSet;

enum class StepStatus { Pending, InProgress, Done, Skipped, Failed };

std::string_view to_string(StepStatus s) noexcept;
std::optional<StepStatus> parse_step_status(std::string_view s) noexcept;
inline bool is_terminal(StepStatus s) noexcept {
  return s == StepStatus::Done || s == StepStatus::Skipped || s == StepStatus::Failed;
}

// Orchestrator checkpoint. `chunks` and `strategy` record the chunking the run
// started with so a resume can detect a changed strategy.
struct RunState {
  std::string plan_hash;
  std::string strategy;
  std::vector<std::vector<StepId>> chunks;
  std::map<StepId, StepStatus> status;
  std::map<StepId, int> attempts;
  std::size_t next_chunk = 0;

  bool finished() const noexcept;

  friend bool operator==(const RunState&, const RunState&) = default;
};

// Fresh state: every step pending, zero attempts, next_chunk 0.
RunState initial_state(const MigrationPlan& plan, std::string strategy, std::vector<std::vector<StepId>> chunks);

std::string serialize_state(const RunState& state);
// Throws Error{StateCorrupt}.
RunState parse_state(std::string_view text);

struct StoredSummary {
  std::size_t chunk_index = 0;
  std::vector<StepId> step_ids;
  std::string body;  // markdown, byte-exact

  friend bool operator==(const StoredSummary&, const StoredSummary&) = default;
};

// File-based store shared by planner, orchestrator and coder:
//
//   plan.json  plan.dot  state.json  bank.lock
//   playbooks/<kind>.<name>.<version>.md
//   summaries/NNNN.md        one per completed chunk, in completion order
//   transcripts/<tag>.json   every provider exchange, grouped by tag
//
// Every write is atomic. Contents carry no timestamps, so identical runs give
// identical banks.
class MemoryBank {
 public:
  // Creates the layout; idempotent. Throws Error{NonEmptyForeignDir} when
  // `dir` holds anything the bank did not create, Error{IoFailure}.
  static MemoryBank init(const std::filesystem::path& dir);

  const std::filesystem::path& root() const noexcept { return root_; }

  bool has_plan() const;
  // Writes plan.json and plan.dot.
  void save_plan(const MigrationPlan& plan) const;
  // Throws Error{PlanMissing} or the plan parse error.
  MigrationPlan load_plan() const;

  bool has_state() const;
  // Throws Error{PlanMissing}, Error{HashMismatch}.
  void save_state(const RunState& state) const;
  // Validates hash and step coverage against the stored plan.
  // Throws Error{StateMissing}, Error{StateCorrupt}, Error{HashMismatch}.
  RunState load_state() const;

  std::size_t summary_count() const;
  // Throws Error{IndexGap} unless index == summary_count().
  void append_summary(std::size_t index, const StoredSummary& summary) const;
  std::vector<StoredSummary> load_summaries() const;
  // Removes summaries with index >= keep (left by a crash between summary
  // and state writes).
  void truncate_summaries(std::size_t keep) const;

  // Stores each playbook once per version; returns the file names of the
  // whole set (new and pre-existing), in set order.
  std::vector<std::string> snapshot_playbooks(const PlaybookSet& set) const;

  std::filesystem::path transcript_path(std::string_view tag) const;
  // Sink for RecordingProvider that appends to transcripts/<tag>.json.
  RecordingProvider::Sink transcript_sink() const;

  // Deletes transcripts whose tag starts with `prefix`.
  void remove_transcripts(std::string_view prefix) const;

  // Drops state, summaries and coder transcripts; keeps the plan, planner
  // transcripts and playbook snapshots.
  void clear_run() const;

 private:
  explicit MemoryBank(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

// Single-writer guard: bank.lock holds the owner's pid. A lock whose owner is
// no longer alive is taken over. A live lock older than `stale_secs` is
// cleared only when `force_clear` is set. Throws Error{BankLocked}.
class BankLock {
 public:
  BankLock(const MemoryBank& bank, int stale_secs = 3600, bool force_clear = false);
  ~BankLock();
  BankLock(const BankLock&) = delete;
  BankLock& operator=(const BankLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace migra
