#include "migra/error.hpp"
#include "migra/orchestrator.hpp"
#include "migra/provider.hpp"
#include "migra/workspace.hpp"

#include "../support/test_support.hpp"

#include <gtest/gtest.h>

using namespace migra;
using namespace migra::testing;

namespace {

using Script = std::vector<std::pair<std::string, std::string>>;

PlanStep make_step(StepId id, std::vector<std::string> targets, std::vector<StepId> deps = {}, std::string title = "") {
  PlanStep s;
  s.step_id = id;
  s.title = title.empty() ? "Step " + std::to_string(id) : title;
  s.target_files = std::move(targets);
  s.instructions = "Port it.";
  s.validation = "builds";
  s.dependencies = std::move(deps);
  return s;
}

// 1, 2 (metrics work), 3 -> 1, 4, 5 -> 4.
MigrationPlan five_steps() {
  return MigrationPlan::from_steps({make_step(1, {"m/a.py"}), make_step(2, {"m/metrics.py"}, {}, "Port metrics"),
                                    make_step(3, {"m/c.py"}, {1}), make_step(4, {"m/d.py"}),
                                    make_step(5, {"m/e.py"}, {4})});
}

std::string prefix(std::size_t chunk, int attempt) {
  return "coder.chunk." + std::to_string(chunk) + ".attempt." + std::to_string(attempt) + ".";
}

// Write, build, done, confirm, summarize.
void succeed(Script& s, std::size_t chunk, int attempt, const std::string& file) {
  const auto p = prefix(chunk, attempt);
  s.emplace_back(p + "turn.1", tool_block("write_file", {{"path", file}, {"content", "chunk " + std::to_string(chunk) + "\n"}}));
  s.emplace_back(p + "turn.2", tool_block("run_build"));
  s.emplace_back(p + "turn.3", fenced("done", ""));
  s.emplace_back(p + "review.1", fenced("confirmed", ""));
  s.emplace_back(p + "summary.1", fenced("summary", "## Changes Made\nchunk " + std::to_string(chunk) +
                                                        "\n## Key Fixes & Learnings\nnone\n"));
}

void fail(Script& s, std::size_t chunk, int attempt) {
  s.emplace_back(prefix(chunk, attempt) + "turn.1", fenced("abort", "stuck on chunk " + std::to_string(chunk)));
}

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoFailure;
}

std::vector<std::vector<StepId>> ids(const std::vector<SubStep>& chunks) {
  std::vector<std::vector<StepId>> out;
  for (const auto& c : chunks) out.push_back(c.step_ids);
  return out;
}

class OrchestratorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::create_directories(dir / "ws");
    ws.emplace(dir / "ws", "true");
    bank.emplace(MemoryBank::init(dir / "bank"));
    bank->save_plan(plan);
    playbooks = PlaybookSet({Playbook::make(PlaybookKind::General, "general", "general rules\n"),
                             Playbook::make(PlaybookKind::Task, "metrics", "metric rules\n")});
    options.strategy = ChunkStrategy{StrategyKind::Fixed, 2};
  }

  RunReport run(const Script& script) {
    provider.emplace(parse_transcript(tag_script(script)));
    RecordingProvider rec(*provider, [&](const CompletionRequest& r, const CompletionResponse&) { requests.push_back(r); });
    return run_migration(plan, *ws, playbooks, rec, *bank, options);
  }
  RunReport resume(const Script& script) {
    provider.emplace(parse_transcript(tag_script(script)));
    RecordingProvider rec(*provider, [&](const CompletionRequest& r, const CompletionResponse&) { requests.push_back(r); });
    return resume_migration(*bank, *ws, playbooks, rec, options);
  }
  const CompletionRequest& first_request(const std::string& tag) const {
    for (const auto& r : requests)
      if (r.tag == tag) return r;
    throw std::runtime_error("no request " + tag);
  }

  TempDir dir;
  MigrationPlan plan = five_steps();
  std::optional<Workspace> ws;
  std::optional<MemoryBank> bank;
  PlaybookSet playbooks;
  RunOptions options;
  std::optional<ScriptedProvider> provider;
  std::vector<CompletionRequest> requests;
};

}  // namespace

TEST(ChunkStrategy, ParseAndDescribe) {
  for (const char* s : {"per_step", "fixed(2)", "file_cluster(3)"}) EXPECT_EQ(ChunkStrategy::parse(s).describe(), s);
  EXPECT_EQ(ChunkStrategy::parse("file_cluster").k, 4);
  EXPECT_EQ(error_of([] { ChunkStrategy::parse("fixed(0)"); }), ErrorCode::InvalidStrategyParam);
  EXPECT_EQ(error_of([] { ChunkStrategy::parse("fixed"); }), ErrorCode::InvalidStrategyParam);
  EXPECT_EQ(error_of([] { ChunkStrategy::parse("fixed(x)"); }), ErrorCode::InvalidStrategyParam);
  EXPECT_EQ(error_of([] { ChunkStrategy::parse("random"); }), ErrorCode::ConfigInvalid);
}

TEST(ChunkPlan, Strategies) {
  const auto plan = five_steps();
  using V = std::vector<std::vector<StepId>>;
  EXPECT_EQ(ids(chunk_plan(plan, {StrategyKind::PerStep, 1})), (V{{1}, {2}, {3}, {4}, {5}}));
  EXPECT_EQ(ids(chunk_plan(plan, {StrategyKind::Fixed, 2})), (V{{1, 2}, {3, 4}, {5}}));
  EXPECT_EQ(ids(chunk_plan(plan, {StrategyKind::Fixed, 10})), (V{{1, 2, 3, 4, 5}}));
  EXPECT_EQ(error_of([&] { chunk_plan(plan, {StrategyKind::Fixed, 0}); }), ErrorCode::InvalidStrategyParam);
  const auto chunks = chunk_plan(plan, {StrategyKind::Fixed, 2});
  for (std::size_t i = 0; i < chunks.size(); ++i) EXPECT_EQ(chunks[i].chunk_index, i);
}

TEST(ChunkPlan, FileClusterJoinsSharedTargetsUpToCap) {
  const auto plan = MigrationPlan::from_steps({make_step(1, {"a.py"}), make_step(2, {"a.py", "b.py"}),
                                               make_step(3, {"b.py"}), make_step(4, {"c.py"}), make_step(5, {"a.py"})});
  using V = std::vector<std::vector<StepId>>;
  EXPECT_EQ(ids(chunk_plan(plan, {StrategyKind::FileCluster, 4})), (V{{1, 2, 3}, {4}, {5}}));
  EXPECT_EQ(ids(chunk_plan(plan, {StrategyKind::FileCluster, 2})), (V{{1, 2}, {3}, {4}, {5}}));
}

TEST(SelectPlaybooks, RulesGateTaskAndClient) {
  const auto plan = five_steps();
  const PlaybookSet set({Playbook::make(PlaybookKind::General, "g", "g"), Playbook::make(PlaybookKind::Style, "s", "s"),
                         Playbook::make(PlaybookKind::Task, "tf2jax", "t"), Playbook::make(PlaybookKind::Task, "metrics", "m"),
                         Playbook::make(PlaybookKind::Client, "yt", "c")});
  const SubStep first{0, {1}, {}}, metrics{1, {2}, {}};
  // No rules: everything.
  EXPECT_EQ(select_playbooks(first, plan, set, {}), set.refs());

  const std::vector<SelectionRule> rules = {{std::string("METRIC"), std::nullopt, {PlaybookKind::Task, "metrics"}},
                                            {std::nullopt, std::string("m/e.py"), {PlaybookKind::Client, "yt"}}};
  auto names = [](const std::vector<PlaybookRef>& refs) {
    std::vector<std::string> out;
    for (const auto& r : refs) out.push_back(to_string(r));
    return out;
  };
  using S = std::vector<std::string>;
  EXPECT_EQ(names(select_playbooks(first, plan, set, rules)), (S{"general/g", "style/s", "task/tf2jax"}));
  EXPECT_EQ(names(select_playbooks(metrics, plan, set, rules)), (S{"general/g", "style/s", "task/tf2jax", "task/metrics"}));
  EXPECT_EQ(names(select_playbooks({2, {4, 5}, {}}, plan, set, rules)), (S{"general/g", "style/s", "task/tf2jax", "client/yt"}));

  const std::vector<SelectionRule> bad = {{std::string("x"), std::nullopt, {PlaybookKind::Task, "absent"}}};
  EXPECT_EQ(error_of([&] { select_playbooks(first, plan, set, bad); }), ErrorCode::UnknownPlaybookInRule);
}

TEST_F(OrchestratorTest, HappyPathFixedTwo) {
  Script s;
  succeed(s, 0, 1, "m/a.py");
  succeed(s, 1, 1, "m/c.py");
  succeed(s, 2, 1, "m/e.py");
  const auto report = run(s);
  EXPECT_EQ(report.status, RunStatus::Completed);
  EXPECT_EQ(report.coder_invocations, 3u);
  EXPECT_EQ(report.chunks.size(), 3u);
  for (const auto& [id, st] : report.step_status) EXPECT_EQ(st, StepStatus::Done) << id;
  EXPECT_EQ(report.attempts.at(5), 1);
  EXPECT_EQ(bank->summary_count(), 3u);
  EXPECT_TRUE(bank->load_state().finished());
  EXPECT_EQ(provider->remaining(), 0u);

  // Later chunks see every earlier summary, oldest first.
  const auto& task = first_request(prefix(2, 1) + "turn.1").messages[1].content;
  const auto s1 = task.find("chunk 0\n"), s2 = task.find("chunk 1\n");
  ASSERT_NE(s1, std::string::npos);
  ASSERT_NE(s2, std::string::npos);
  EXPECT_LT(s1, s2);
  // No rules configured: the task playbook goes to every chunk.
  EXPECT_NE(first_request(prefix(0, 1) + "turn.1").messages[0].content.find("## PLAYBOOK: task/metrics"), std::string::npos);
}

TEST_F(OrchestratorTest, RuleGatedPlaybookOnlyWhereItFires) {
  options.rules = {{std::string("metric"), std::nullopt, {PlaybookKind::Task, "metrics"}}};
  options.strategy = ChunkStrategy{StrategyKind::PerStep, 1};
  Script s;
  for (std::size_t c = 0; c < 5; ++c) succeed(s, c, 1, "m/x" + std::to_string(c) + ".py");
  run(s);
  EXPECT_EQ(first_request(prefix(0, 1) + "turn.1").messages[0].content.find("task/metrics"), std::string::npos);
  EXPECT_NE(first_request(prefix(1, 1) + "turn.1").messages[0].content.find("## PLAYBOOK: task/metrics"), std::string::npos);
}

TEST_F(OrchestratorTest, RetryThenSuccess) {
  Script s;
  fail(s, 0, 1);
  succeed(s, 0, 2, "m/a.py");
  succeed(s, 1, 1, "m/c.py");
  succeed(s, 2, 1, "m/e.py");
  const auto report = run(s);
  EXPECT_EQ(report.status, RunStatus::Completed);
  EXPECT_EQ(report.attempts.at(1), 2);
  EXPECT_EQ(report.attempts.at(2), 2);
  EXPECT_EQ(report.attempts.at(3), 1);
  EXPECT_EQ(report.chunks[0].attempts, 2);
  EXPECT_EQ(report.coder_invocations, 4u);
  EXPECT_NE(first_request(prefix(0, 2) + "turn.1").messages[1].content.find("## Previous attempt failed\ncoder aborted: stuck on chunk 0"),
            std::string::npos);
}

TEST_F(OrchestratorTest, ExhaustionAborts) {
  options.policy.max_retries = 1;
  Script s;
  fail(s, 0, 1);
  fail(s, 0, 2);
  const auto report = run(s);
  EXPECT_EQ(report.status, RunStatus::Aborted);
  EXPECT_EQ(report.step_status.at(1), StepStatus::Failed);
  EXPECT_EQ(report.step_status.at(3), StepStatus::Pending);
  EXPECT_EQ(bank->load_state().status.at(2), StepStatus::Failed);
  // A failed run cannot be resumed past the failure.
  EXPECT_EQ(resume({}).status, RunStatus::Aborted);
}

TEST_F(OrchestratorTest, SkipCascadesToDependents) {
  options.strategy = ChunkStrategy{StrategyKind::PerStep, 1};
  options.policy = {0, ExhaustionAction::Skip, true};
  Script s;
  fail(s, 0, 1);  // step 1
  succeed(s, 1, 1, "m/metrics.py");
  // chunk 2 (step 3) depends on step 1 and is skipped without a coder call.
  succeed(s, 3, 1, "m/d.py");
  succeed(s, 4, 1, "m/e.py");
  const auto report = run(s);
  EXPECT_EQ(report.status, RunStatus::Completed);
  EXPECT_EQ(report.step_status.at(1), StepStatus::Skipped);
  EXPECT_EQ(report.step_status.at(3), StepStatus::Skipped);
  EXPECT_EQ(report.step_status.at(5), StepStatus::Done);
  EXPECT_EQ(report.coder_invocations, 4u);
  EXPECT_EQ(bank->summary_count(), 3u);
}

TEST_F(OrchestratorTest, SkipWithoutCascadeStillRunsDependents) {
  options.strategy = ChunkStrategy{StrategyKind::PerStep, 1};
  options.policy = {0, ExhaustionAction::Skip, false};
  Script s;
  fail(s, 0, 1);
  succeed(s, 1, 1, "m/metrics.py");
  succeed(s, 2, 1, "m/c.py");
  succeed(s, 3, 1, "m/d.py");
  succeed(s, 4, 1, "m/e.py");
  const auto report = run(s);
  EXPECT_EQ(report.step_status.at(1), StepStatus::Skipped);
  EXPECT_EQ(report.step_status.at(3), StepStatus::Done);
}

TEST_F(OrchestratorTest, StopAndResumeContinuesWithoutRerunning) {
  Script all;
  succeed(all, 0, 1, "m/a.py");
  succeed(all, 1, 1, "m/c.py");
  succeed(all, 2, 1, "m/e.py");
  options.stop_after_chunks = 1;
  const auto first = run(all);
  EXPECT_EQ(first.status, RunStatus::Interrupted);
  EXPECT_EQ(first.next_chunk, 1u);
  EXPECT_EQ(provider->consumed(), 5u);

  Script rest(all.begin() + 5, all.end());
  options.stop_after_chunks.reset();
  const auto second = resume(rest);
  EXPECT_EQ(second.status, RunStatus::Completed);
  EXPECT_EQ(second.coder_invocations, 2u);
  EXPECT_EQ(second.attempts.at(1), 1);
  EXPECT_EQ(bank->summary_count(), 3u);
}

TEST_F(OrchestratorTest, ResumeAfterCrashReplaysTheAttempt) {
  Script s;
  succeed(s, 0, 1, "m/a.py");
  options.stop_after_chunks = 1;
  run(s);
  // Simulate a crash in chunk 1: steps in progress, a stray summary written.
  auto st = bank->load_state();
  st.status[3] = st.status[4] = StepStatus::InProgress;
  st.attempts[3] = st.attempts[4] = 1;
  bank->save_state(st);
  bank->append_summary(1, {1, {3, 4}, "half-written"});
  write_file(bank->transcript_path(prefix(1, 1) + "turn.1"), "[]");

  options.stop_after_chunks.reset();
  Script rest;
  succeed(rest, 1, 1, "m/c.py");
  succeed(rest, 2, 1, "m/e.py");
  const auto report = resume(rest);
  EXPECT_EQ(report.status, RunStatus::Completed);
  EXPECT_EQ(report.attempts.at(3), 1);
  const auto summaries = bank->load_summaries();
  ASSERT_EQ(summaries.size(), 3u);
  EXPECT_NE(summaries[1].body.find("chunk 1"), std::string::npos);
}

TEST_F(OrchestratorTest, ResumeMismatches) {
  Script s;
  succeed(s, 0, 1, "m/a.py");
  options.stop_after_chunks = 1;
  run(s);
  options.stop_after_chunks.reset();

  auto other_options = options;
  other_options.strategy = ChunkStrategy{StrategyKind::PerStep, 1};
  ScriptedProvider p(parse_transcript(sequence_script({})));
  EXPECT_EQ(error_of([&] { resume_migration(*bank, *ws, playbooks, p, other_options); }), ErrorCode::StrategyMismatch);

  const auto other_plan = MigrationPlan::from_steps({make_step(1, {"z.py"})});
  EXPECT_EQ(error_of([&] { resume_migration(*bank, *ws, playbooks, p, options, &other_plan); }), ErrorCode::BankPlanMismatch);

  // The plan changed under the state.
  bank->save_plan(other_plan);
  EXPECT_EQ(error_of([&] { resume_migration(*bank, *ws, playbooks, p, options); }), ErrorCode::BankPlanMismatch);
}

TEST_F(OrchestratorTest, RunRequiresBankPlan) {
  const auto other_plan = MigrationPlan::from_steps({make_step(1, {"z.py"})});
  ScriptedProvider p(parse_transcript(sequence_script({})));
  EXPECT_EQ(error_of([&] { run_migration(other_plan, *ws, playbooks, p, *bank, options); }), ErrorCode::BankPlanMismatch);
  TempDir empty;
  auto fresh = MemoryBank::init(empty / "bank");
  EXPECT_EQ(error_of([&] { resume_migration(fresh, *ws, playbooks, p, options); }), ErrorCode::PlanMissing);
}

TEST_F(OrchestratorTest, ProviderErrorsCarryChunkIndex) {
  Script s;
  succeed(s, 0, 1, "m/a.py");
  try {
    run(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScriptExhausted);
    EXPECT_NE(std::string(e.what()).find("chunk 1"), std::string::npos) << e.what();
  }
  // The state shows the chunk as in progress, ready for a resume.
  EXPECT_EQ(bank->load_state().status.at(3), StepStatus::InProgress);
}

TEST_F(OrchestratorTest, UnknownRulePlaybookFailsBeforeWork) {
  options.rules = {{std::string("x"), std::nullopt, {PlaybookKind::Client, "nobody"}}};
  EXPECT_EQ(error_of([&] { run({}); }), ErrorCode::UnknownPlaybookInRule);
  EXPECT_FALSE(bank->has_state());
}
