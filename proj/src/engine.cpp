#include "migra/engine.hpp"

#include "migra/depgraph.hpp"
#include "migra/error.hpp"
#include "migra/fs_util.hpp"
#include "migra/judge.hpp"
#include "migra/memory_bank.hpp"
#include "migra/orchestrator.hpp"
#include "migra/planner.hpp"
#include "migra/provider.hpp"
#include "migra/stats.hpp"
#include "migra/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace migra {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json findings_json(const std::vector<LintFinding>& findings) {
  json arr = json::array();
  for (const auto& f : findings) {
    json j;
    j["step_id"] = f.step_id ? json(*f.step_id) : json(nullptr);
    j["severity"] = to_string(f.severity);
    j["code"] = to_string(f.code);
    j["message"] = f.message;
    arr.push_back(std::move(j));
  }
  return arr;
}

CommandResult report_json(const RunReport& report) {
  json j;
  j["status"] = to_string(report.status);
  json steps = json::array();
  bool all_done = true;
  for (const auto& [id, s] : report.step_status) {
    steps.push_back({{"step_id", id}, {"status", to_string(s)}, {"attempts", report.attempts.at(id)}});
    all_done = all_done && s == StepStatus::Done;
  }
  j["steps"] = std::move(steps);
  json chunks = json::array();
  for (const auto& c : report.chunks) {
    chunks.push_back({{"chunk", c.chunk_index},
                      {"steps", c.step_ids},
                      {"outcome", to_string(c.outcome)},
                      {"attempts", c.attempts},
                      {"wall_secs", c.wall_secs}});
  }
  j["chunks"] = std::move(chunks);
  j["coder_invocations"] = report.coder_invocations;
  j["next_chunk"] = report.next_chunk;
  // A requested stop is not a failure; resume picks it up.
  const bool success = (report.status == RunStatus::Completed && all_done) || report.status == RunStatus::Interrupted;
  j["success"] = success;
  return {j.dump(2), success};
}

bool under_any(std::string_view path, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const auto& p) { return path_under(path, p); });
}

}  // namespace

Engine::Engine(EngineConfig config) : config_(std::move(config)) {}

Workspace Engine::make_workspace() const {
  Workspace ws(config_.workspace_root, config_.build_cmd, config_.test_cmd, config_.timeout_secs);
  ws.set_import_rules(config_.import_rules);
  return ws;
}

MigrationPlan Engine::single_agent_plan(const Workspace& workspace) const {
  if (config_.root_file.empty()) throw Error(ErrorCode::ConfigInvalid, "'root_file' is required");
  if (config_.target_root.empty()) throw Error(ErrorCode::ConfigInvalid, "'target_root' is required");
  const auto graph = build_graph(config_.root_file, workspace, ImportOptions{config_.source_ext});
  const auto order = leaf_first_order(graph);
  PlanStep step;
  step.step_id = 1;
  step.title = "Migrate " + config_.root_file + " and all dependencies";
  std::string listing;
  for (const auto& cluster : order.clusters) {
    for (const auto& f : cluster) {
      if (under_any(f, config_.excluded_prefixes)) continue;
      step.source_files.push_back(f);
      listing += "- " + f + "\n";
    }
  }
  std::sort(step.source_files.begin(), step.source_files.end());
  step.target_files = {config_.target_root};
  step.instructions = "Migrate " + config_.root_file + " and every workspace file it depends on into " +
                      config_.target_root + ". Files, dependencies first:\n" + listing;
  step.validation = "The migrated code under " + config_.target_root + " builds with the configured build command.";
  return MigrationPlan::from_steps({std::move(step)});
}

CommandResult Engine::plan(const std::optional<std::string>& root_override, bool overwrite) {
  const auto ws = make_workspace();
  const auto bank = MemoryBank::init(config_.bank_dir);
  BankLock lock(bank, config_.lock_stale_secs, force_unlock_);
  const auto playbooks = load_set(active_playbook_sources(config_));

  std::optional<std::string> old_hash;
  if (bank.has_plan()) {
    if (!overwrite) throw Error(ErrorCode::PlanExists, "bank already holds a plan; pass --overwrite to replace it");
    try {
      old_hash = bank.load_plan().plan_hash();
    } catch (const Error&) {
      old_hash = "";
    }
  }

  json j;
  std::optional<MigrationPlan> plan;
  std::vector<LintFinding> findings;
  LintOptions lint{config_.limits.oversized_step_budget, config_.excluded_prefixes};
  if (!config_.flags.planner_orchestrator) {
    auto cfg = config_;
    if (root_override) cfg.root_file = *root_override;
    plan = Engine(cfg).single_agent_plan(ws);
    findings = validate_plan(*plan, ws, lint);
    j["rounds"] = 0;
    j["gaps_remaining"] = false;
  } else {
    const std::string root = root_override.value_or(config_.root_file);
    if (root.empty()) throw Error(ErrorCode::ConfigInvalid, "no root file: pass --root or set 'root_file'");
    auto provider = make_provider(config_.provider, config_.limits);
    RecordingProvider recorder(*provider, bank.transcript_sink());
    bank.remove_transcripts("planner.");
    PlannerOptions opts;
    opts.max_rounds = config_.limits.max_rounds;
    opts.excluded_prefixes = config_.excluded_prefixes;
    opts.imports.extension = config_.source_ext;
    opts.temperature = config_.provider.temperature;
    auto result = plan_migration(root, ws, playbooks, recorder, opts);
    findings = validate_plan(result.plan, ws, lint);
    j["rounds"] = result.rounds;
    j["gaps_remaining"] = result.gaps_remaining;
    plan = std::move(result.plan);
  }
  if (old_hash && *old_hash != plan->plan_hash()) bank.clear_run();
  bank.save_plan(*plan);
  bank.snapshot_playbooks(playbooks);

  j["steps"] = plan->steps().size();
  j["plan_hash"] = plan->plan_hash();
  j["plan_path"] = (bank.root() / "plan.json").string();
  j["dot_path"] = (bank.root() / "plan.dot").string();
  j["findings"] = findings_json(findings);
  return {j.dump(2), true};
}

CommandResult Engine::run(const RunRequest& request) {
  const auto ws = make_workspace();
  const auto bank = MemoryBank::init(config_.bank_dir);
  BankLock lock(bank, config_.lock_stale_secs, force_unlock_);
  const auto playbooks = load_set(active_playbook_sources(config_));

  RunOptions options;
  options.policy = config_.failure_policy;
  options.coder.max_iterations = config_.limits.max_iterations;
  options.coder.temperature = config_.provider.temperature;
  options.stop_after_chunks = request.stop_after_chunks;
  if (config_.flags.planner_orchestrator) {
    options.strategy = config_.strategy;
    options.rules = config_.playbook_rules;
  } else {
    // Baseline: one coder invocation over one synthetic step, every loaded
    // playbook in the prompt.
    options.strategy = ChunkStrategy{StrategyKind::PerStep, 1};
    const auto synthetic = single_agent_plan(ws);
    if (!bank.has_plan() || bank.load_plan().plan_hash() != synthetic.plan_hash()) {
      bank.clear_run();
      bank.save_plan(synthetic);
    }
  }
  if (!bank.has_plan()) {
    throw Error(ErrorCode::PlanMissing, "plan missing: run the plan command before run");
  }
  const auto plan = bank.load_plan();
  if (bank.has_state() && !request.force) {
    const auto state = bank.load_state();
    if (state.finished()) {
      throw Error(ErrorCode::RunCompleted, "the stored run already finished; pass --force to run again");
    }
    throw Error(ErrorCode::RunInProgress, "a run is in progress; use resume, or pass --force to start over");
  }
  auto provider = make_provider(config_.provider, config_.limits);
  RecordingProvider recorder(*provider, bank.transcript_sink());
  return report_json(run_migration(plan, ws, playbooks, recorder, bank, options));
}

CommandResult Engine::resume(const RunRequest& request) {
  const auto ws = make_workspace();
  if (!fs::is_regular_file(config_.bank_dir / "plan.json")) {
    throw Error(ErrorCode::PlanMissing, "plan missing: nothing to resume in " + config_.bank_dir.string());
  }
  const auto bank = MemoryBank::init(config_.bank_dir);
  BankLock lock(bank, config_.lock_stale_secs, force_unlock_);
  const auto playbooks = load_set(active_playbook_sources(config_));
  RunOptions options;
  options.policy = config_.failure_policy;
  options.coder.max_iterations = config_.limits.max_iterations;
  options.coder.temperature = config_.provider.temperature;
  options.stop_after_chunks = request.stop_after_chunks;
  if (config_.flags.planner_orchestrator) {
    options.strategy = config_.strategy;
    options.rules = config_.playbook_rules;
  }
  auto provider = make_provider(config_.provider, config_.limits);
  RecordingProvider recorder(*provider, bank.transcript_sink());
  return report_json(resume_migration(bank, ws, playbooks, recorder, options));
}

CommandResult Engine::judge(const JudgeRequest& request) {
  if (request.runs < 1) throw Error(ErrorCode::ConfigInvalid, "--runs must be at least 1");
  const auto ws = make_workspace();
  const auto checklist = parse_checklist(read_text_file(request.checklist));
  auto targets = request.targets;
  if (targets.empty() && !config_.target_root.empty()) targets.push_back(config_.target_root);
  if (targets.empty()) throw Error(ErrorCode::ConfigInvalid, "no judge targets: pass --targets or set 'target_root'");
  const auto model = request.model.value_or(fs::path(config_.root_file).stem().string());
  auto provider = make_provider(config_.judge_provider.value_or(config_.provider), config_.limits);

  std::vector<ScoreRecord> records;
  if (request.append && request.out && fs::exists(*request.out)) records = parse_scores(read_text_file(*request.out));

  json runs = json::array();
  double sum = 0.0;
  for (int r = 1; r <= request.runs; ++r) {
    JudgeOptions opts;
    opts.max_iterations = config_.limits.judge_max_iterations;
    opts.temperature = config_.judge_provider.value_or(config_.provider).temperature;
    opts.run_index = r;
    const auto result = judge_migration(checklist, targets, ws, *provider, opts);
    json items = json::array();
    for (const auto& it : result.verdict.items) {
      items.push_back({{"index", it.index}, {"pass", it.pass}, {"evidence", it.evidence}});
    }
    std::size_t denied = 0;
    for (const auto& [call, res] : result.tool_log) denied += res.error_code == ErrorCode::ToolDenied;
    runs.push_back({{"run_id", std::to_string(r)},
                    {"score", result.verdict.score},
                    {"iterations", result.iterations},
                    {"denied_accesses", denied},
                    {"items", std::move(items)}});
    records.push_back({config_.name, model, std::to_string(r), result.verdict.score});
    sum += result.verdict.score;
  }
  if (request.out) atomic_write_file(*request.out, serialize_scores(records));

  json j;
  j["config"] = config_.name;
  j["model"] = model;
  j["items"] = checklist.size();
  j["runs"] = std::move(runs);
  j["mean"] = sum / request.runs;
  j["out"] = request.out ? json(request.out->string()) : json(nullptr);
  return {j.dump(2), true};
}

CommandResult Engine::playbook_generate(const PlaybookGenRequest& request) {
  const auto ws = make_workspace();
  std::vector<GoldenPair> pairs;
  std::set<std::string> labels;
  for (const auto& [src, dst] : request.golden) {
    std::string base = fs::path(src).lexically_normal().filename().string();
    if (base.empty() || base == ".") base = "pair";
    std::string label = base;
    for (int n = 2; labels.count(label); ++n) label = base + "-" + std::to_string(n);
    labels.insert(label);
    pairs.push_back({src, dst, label});
  }
  auto provider = make_provider(config_.provider, config_.limits);
  std::size_t calls = 0;
  RecordingProvider counter(*provider, [&](const CompletionRequest&, const CompletionResponse&) { ++calls; });
  ClientPlaybookOptions opts;
  opts.name = request.name;
  opts.temperature = config_.provider.temperature;
  const auto playbook = generate_client_playbook(pairs, counter, ws, opts);

  json j;
  j["name"] = playbook.name;
  j["version"] = playbook.version;
  j["calls"] = calls;
  j["body"] = playbook.body;
  if (request.out && request.review) {
    atomic_write_file(*request.out, playbook.body);
    j["written"] = request.out->string();
  } else {
    j["written"] = nullptr;
  }
  return {j.dump(2), true};
}

CommandResult Engine::viz(const std::optional<fs::path>& out) {
  if (!fs::is_regular_file(config_.bank_dir / "plan.json")) {
    throw Error(ErrorCode::PlanMissing, "plan missing: no plan in " + config_.bank_dir.string());
  }
  const auto plan = parse_plan(read_text_file(config_.bank_dir / "plan.json"));
  const auto dot = render_plan_dot(plan);
  if (out) atomic_write_file(*out, dot);
  json j;
  j["dot"] = dot;
  j["out"] = out ? json(out->string()) : json(nullptr);
  return {j.dump(2), true};
}

CommandResult Engine::eval_compare(const CompareRequest& request) {
  auto pick = [](const fs::path& file, const std::optional<std::string>& wanted) {
    const auto agg = aggregate_scores(parse_scores(read_text_file(file)));
    if (wanted) {
      auto it = agg.find(*wanted);
      if (it == agg.end()) throw Error(ErrorCode::ConfigInvalid, file.string() + " has no configuration '" + *wanted + "'");
      return it->second;
    }
    if (agg.size() != 1) {
      throw Error(ErrorCode::ConfigInvalid, file.string() + " holds several configurations; choose one with --a-config/--b-config");
    }
    return agg.begin()->second;
  };
  const auto a = pick(request.a, request.a_config);
  const auto b = pick(request.b, request.b_config);
  std::map<std::string, double> ma, mb;
  for (const auto& [m, s] : a.models) ma[m] = s.mean;
  for (const auto& [m, s] : b.models) mb[m] = s.mean;
  const auto t = paired_t(ma, mb);

  auto side = [](const ConfigScores& cs) {
    json j;
    j["config"] = cs.config_name;
    json models = json::object();
    for (const auto& [m, s] : cs.models) models[m] = {{"mean", s.mean}, {"runs", s.runs}};
    j["models"] = std::move(models);
    j["total"] = cs.total;
    if (cs.flags) {
      j["flags"] = {{"planner_orchestrator", cs.flags->planner_orchestrator},
                    {"client_playbook", cs.flags->client_playbook},
                    {"task_style_playbooks", cs.flags->task_style_playbooks}};
    }
    return j;
  };
  json j;
  j["a"] = side(a);
  j["b"] = side(b);
  j["t"] = t.t;
  j["dof"] = t.dof;
  j["mean_diff"] = t.mean_diff;
  j["sd_diff"] = t.sd_diff;
  j["critical_05"] = t_critical_05(t.dof);
  return {j.dump(2), true};
}

}  // namespace migra
