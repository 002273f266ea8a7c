#include "migra/orchestrator.hpp"

#include "migra/error.hpp"
#include "migra/provider.hpp"
#include "migra/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>

namespace migra {

std::string ChunkStrategy::describe() const {
  switch (kind) {
    case StrategyKind::PerStep: return "per_step";
    case StrategyKind::Fixed: return "fixed(" + std::to_string(k) + ")";
    case StrategyKind::FileCluster: return "file_cluster(" + std::to_string(k) + ")";
  }
  return "per_step";
}

ChunkStrategy ChunkStrategy::parse(std::string_view text) {
  auto with_param = [&](std::string_view name, StrategyKind kind, std::optional<int> fallback) -> std::optional<ChunkStrategy> {
    if (text.substr(0, name.size()) != name) return std::nullopt;
    auto rest = text.substr(name.size());
    if (rest.empty()) {
      if (!fallback) throw Error(ErrorCode::InvalidStrategyParam, std::string(name) + " needs a size, e.g. " + std::string(name) + "(2)");
      return ChunkStrategy{kind, *fallback};
    }
    if (rest.front() != '(' || rest.back() != ')') return std::nullopt;
    const std::string num(rest.substr(1, rest.size() - 2));
    if (num.empty() || !std::all_of(num.begin(), num.end(), [](char c) { return c == '-' || std::isdigit(static_cast<unsigned char>(c)); })) {
      throw Error(ErrorCode::InvalidStrategyParam, "bad strategy parameter '" + num + "'");
    }
    const int k = std::stoi(num);
    if (k < 1) throw Error(ErrorCode::InvalidStrategyParam, "strategy parameter must be at least 1");
    return ChunkStrategy{kind, k};
  };
  if (text == "per_step") return ChunkStrategy{StrategyKind::PerStep, 1};
  if (auto s = with_param("fixed", StrategyKind::Fixed, std::nullopt)) return *s;
  if (auto s = with_param("file_cluster", StrategyKind::FileCluster, 4)) return *s;
  throw Error(ErrorCode::ConfigInvalid, "unknown chunking strategy '" + std::string(text) + "'");
}

std::vector<SubStep> chunk_plan(const MigrationPlan& plan, const ChunkStrategy& strategy) {
  if (strategy.kind != StrategyKind::PerStep && strategy.k < 1) {
    throw Error(ErrorCode::InvalidStrategyParam, "chunk size must be at least 1, got " + std::to_string(strategy.k));
  }
  std::vector<SubStep> chunks;
  std::set<std::string> chunk_targets;
  for (const auto& step : plan.steps()) {
    bool join = false;
    if (!chunks.empty()) {
      const auto size = static_cast<int>(chunks.back().step_ids.size());
      switch (strategy.kind) {
        case StrategyKind::PerStep: break;
        case StrategyKind::Fixed: join = size < strategy.k; break;
        case StrategyKind::FileCluster:
          join = size < strategy.k && std::any_of(step.target_files.begin(), step.target_files.end(),
                                                  [&](const auto& t) { return chunk_targets.count(t) > 0; });
          break;
      }
    }
    if (!join) {
      chunks.push_back(SubStep{chunks.size(), {}, {}});
      chunk_targets.clear();
    }
    chunks.back().step_ids.push_back(step.step_id);
    chunk_targets.insert(step.target_files.begin(), step.target_files.end());
  }
  return chunks;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool rule_fires(const SelectionRule& rule, const SubStep& substep, const MigrationPlan& plan) {
  for (auto id : substep.step_ids) {
    const auto& step = plan.step(id);
    if (rule.keyword) {
      const auto kw = lower(*rule.keyword);
      if (lower(step.instructions).find(kw) != std::string::npos || lower(step.title).find(kw) != std::string::npos) {
        return true;
      }
    }
    if (rule.target_prefix) {
      for (const auto& t : step.target_files)
        if (path_under(t, *rule.target_prefix)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<PlaybookRef> select_playbooks(const SubStep& substep, const MigrationPlan& plan, const PlaybookSet& set,
                                          const std::vector<SelectionRule>& rules) {
  for (const auto& r : rules) {
    if (!set.find(r.playbook)) {
      throw Error(ErrorCode::UnknownPlaybookInRule, "rule names " + to_string(r.playbook) + ", which is not loaded");
    }
  }
  std::vector<PlaybookRef> out;
  for (const auto& ref : set.refs()) {
    if (ref.kind == PlaybookKind::General || ref.kind == PlaybookKind::Style) {
      out.push_back(ref);
      continue;
    }
    bool gated = false, fired = false;
    for (const auto& r : rules) {
      if (r.playbook != ref) continue;
      gated = true;
      fired = fired || rule_fires(r, substep, plan);
    }
    if (!gated || fired) out.push_back(ref);
  }
  return out;
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Aborted: return "aborted";
    case RunStatus::Interrupted: return "interrupted";
  }
  return "completed";
}

namespace {

void cascade_skips(const MigrationPlan& plan, RunState& state) {
  for (const auto& step : plan.steps()) {
    if (is_terminal(state.status[step.step_id])) continue;
    for (auto dep : step.dependencies) {
      if (state.status[dep] == StepStatus::Skipped) {
        state.status[step.step_id] = StepStatus::Skipped;
        break;
      }
    }
  }
}

std::vector<std::vector<StepId>> boundaries(const std::vector<SubStep>& chunks) {
  std::vector<std::vector<StepId>> out;
  for (const auto& c : chunks) out.push_back(c.step_ids);
  return out;
}

RunReport drive(const MigrationPlan& plan, RunState state, std::vector<SubStep> chunks, const Workspace& workspace,
                const PlaybookSet& playbooks, CompletionProvider& provider, const MemoryBank& bank,
                const RunOptions& options) {
  using clock = std::chrono::steady_clock;
  RunReport report;
  report.status = RunStatus::Completed;
  const auto& policy = options.policy;
  const int max_attempts = std::max(0, policy.max_retries) + 1;
  std::size_t handled = 0;

  auto finish = [&](RunStatus status) {
    report.status = status;
    report.step_status = state.status;
    report.attempts = state.attempts;
    report.next_chunk = state.next_chunk;
    return report;
  };

  while (state.next_chunk < chunks.size()) {
    if (options.stop_after_chunks && handled >= *options.stop_after_chunks) return finish(RunStatus::Interrupted);
    auto& chunk = chunks[state.next_chunk];
    const auto started = clock::now();
    ChunkReport cr{chunk.chunk_index, chunk.step_ids, StepStatus::Pending, 0, 0.0};

    const bool any_failed = std::any_of(chunk.step_ids.begin(), chunk.step_ids.end(),
                                        [&](StepId id) { return state.status[id] == StepStatus::Failed; });
    if (any_failed) return finish(RunStatus::Aborted);

    const bool any_skipped = std::any_of(chunk.step_ids.begin(), chunk.step_ids.end(),
                                         [&](StepId id) { return state.status[id] == StepStatus::Skipped; });
    if (any_skipped) {
      for (auto id : chunk.step_ids) state.status[id] = StepStatus::Skipped;
      if (policy.skip_cascade) cascade_skips(plan, state);
      ++state.next_chunk;
      bank.save_state(state);
      cr.outcome = StepStatus::Skipped;
      report.chunks.push_back(cr);
      ++handled;
      continue;
    }

    // Dependencies-first guard: everything a step needs is done (or, without
    // cascading, deliberately skipped) or sits earlier in the same chunk.
    std::set<StepId> earlier_in_chunk;
    for (auto id : chunk.step_ids) {
      for (auto dep : plan.step(id).dependencies) {
        const auto s = state.status[dep];
        const bool ok = s == StepStatus::Done || (s == StepStatus::Skipped && !policy.skip_cascade) ||
                        earlier_in_chunk.count(dep);
        if (!ok) {
          throw Error(ErrorCode::ForwardDependency, "chunk " + std::to_string(chunk.chunk_index) + ": step " +
                                                        std::to_string(id) + " would run before dependency " +
                                                        std::to_string(dep));
        }
      }
      earlier_in_chunk.insert(id);
    }

    chunk.playbook_selection = select_playbooks(chunk, plan, playbooks, options.rules);
    CoderContext ctx;
    ctx.system_prompt = assemble_system_prompt(playbooks, chunk.playbook_selection);
    ctx.substep = chunk;
    for (auto id : chunk.step_ids) ctx.steps.push_back(plan.step(id));

    for (;;) {
      for (auto id : chunk.step_ids) {
        state.status[id] = StepStatus::InProgress;
        ++state.attempts[id];
      }
      bank.save_state(state);

      ctx.attempt = state.attempts[chunk.step_ids.front()];
      ctx.prior_summaries.clear();
      for (auto& s : bank.load_summaries()) ctx.prior_summaries.push_back(std::move(s.body));

      CoderOutcome outcome;
      try {
        outcome = execute_substep(ctx, workspace, provider, options.coder);
      } catch (const Error& e) {
        rethrow_with_context(e, "chunk " + std::to_string(chunk.chunk_index));
      }
      ++report.coder_invocations;
      cr.attempts = ctx.attempt;

      if (outcome.status == CoderStatus::Success) {
        for (auto id : chunk.step_ids) state.status[id] = StepStatus::Done;
        bank.append_summary(bank.summary_count(), StoredSummary{chunk.chunk_index, chunk.step_ids, outcome.summary});
        ++state.next_chunk;
        bank.save_state(state);
        cr.outcome = StepStatus::Done;
        break;
      }
      if (ctx.attempt < max_attempts) {
        for (auto id : chunk.step_ids) state.status[id] = StepStatus::Pending;
        bank.save_state(state);
        ctx.retry_note = outcome.failure_reason;
        continue;
      }
      if (policy.on_exhaustion == ExhaustionAction::Abort) {
        for (auto id : chunk.step_ids) state.status[id] = StepStatus::Failed;
        bank.save_state(state);
        cr.outcome = StepStatus::Failed;
        cr.wall_secs = std::chrono::duration<double>(clock::now() - started).count();
        report.chunks.push_back(cr);
        return finish(RunStatus::Aborted);
      }
      for (auto id : chunk.step_ids) state.status[id] = StepStatus::Skipped;
      if (policy.skip_cascade) cascade_skips(plan, state);
      ++state.next_chunk;
      bank.save_state(state);
      cr.outcome = StepStatus::Skipped;
      break;
    }
    cr.wall_secs = std::chrono::duration<double>(clock::now() - started).count();
    report.chunks.push_back(cr);
    ++handled;
  }
  return finish(RunStatus::Completed);
}

}  // namespace

RunReport run_migration(const MigrationPlan& plan, const Workspace& workspace, const PlaybookSet& playbooks,
                        CompletionProvider& provider, const MemoryBank& bank, const RunOptions& options) {
  const auto stored = bank.load_plan();
  if (stored.plan_hash() != plan.plan_hash()) {
    throw Error(ErrorCode::BankPlanMismatch, "bank holds plan " + stored.plan_hash() + ", run was given " + plan.plan_hash());
  }
  auto chunks = chunk_plan(plan, options.strategy);
  for (const auto& c : chunks) select_playbooks(c, plan, playbooks, options.rules);  // rule check before any work
  bank.clear_run();
  bank.snapshot_playbooks(playbooks);
  auto state = initial_state(plan, options.strategy.describe(), boundaries(chunks));
  bank.save_state(state);
  return drive(plan, std::move(state), std::move(chunks), workspace, playbooks, provider, bank, options);
}

RunReport resume_migration(const MemoryBank& bank, const Workspace& workspace, const PlaybookSet& playbooks,
                           CompletionProvider& provider, const RunOptions& options, const MigrationPlan* expected_plan) {
  MigrationPlan plan = [&] {
    try {
      return bank.load_plan();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::PlanMissing) throw;
      throw Error(ErrorCode::BankPlanMismatch, std::string("stored plan no longer valid: ") + e.what());
    }
  }();
  if (expected_plan && expected_plan->plan_hash() != plan.plan_hash()) {
    throw Error(ErrorCode::BankPlanMismatch, "bank holds plan " + plan.plan_hash() + ", expected " + expected_plan->plan_hash());
  }
  RunState state;
  try {
    state = bank.load_state();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::HashMismatch) {
      throw Error(ErrorCode::BankPlanMismatch, std::string("plan changed since the run started: ") + e.what());
    }
    throw;
  }
  auto chunks = chunk_plan(plan, options.strategy);
  if (boundaries(chunks) != state.chunks) {
    throw Error(ErrorCode::StrategyMismatch, "run started with " + state.strategy + ", chunking now differs (" +
                                                 options.strategy.describe() + ")");
  }
  bool crashed = false;
  for (auto& [id, s] : state.status) {
    if (s == StepStatus::InProgress) {
      s = StepStatus::Pending;
      state.attempts[id] = std::max(0, state.attempts[id] - 1);
      crashed = true;
    }
  }
  if (crashed && state.next_chunk < state.chunks.size()) {
    // The interrupted attempt is replayed under the same number.
    const auto attempt = state.attempts[state.chunks[state.next_chunk].front()] + 1;
    bank.remove_transcripts("coder.chunk." + std::to_string(state.next_chunk) + ".attempt." + std::to_string(attempt) + ".");
  }
  std::size_t done_chunks = 0;
  for (std::size_t i = 0; i < state.next_chunk; ++i) {
    const auto& ids = state.chunks[i];
    if (std::all_of(ids.begin(), ids.end(), [&](StepId id) { return state.status[id] == StepStatus::Done; })) ++done_chunks;
  }
  bank.truncate_summaries(done_chunks);
  if (crashed) bank.save_state(state);
  bank.snapshot_playbooks(playbooks);
  return drive(plan, std::move(state), std::move(chunks), workspace, playbooks, provider, bank, options);
}

}  // namespace migra
