// migra: command-line front end over the C API.
#include "migra/migra.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

struct EngineOptions {
  std::string config;
  std::string preset;
  std::string script;
  std::vector<std::string> flags;  // name=true|false
  bool force_unlock = false;
};

int exit_code(migra_status st) {
  switch (st) {
    case MIGRA_OK: return 0;
    case MIGRA_FAILED: return 1;
    case MIGRA_EUSAGE: return 2;
    case MIGRA_EERROR: return 1;
  }
  return 1;
}

int report_error(migra_status st) {
  std::cerr << "error: " << migra_last_error() << "\n";
  return exit_code(st);
}

// Engine handle with RAII close.
class Handle {
 public:
  ~Handle() { migra_engine_close(engine_); }
  migra_engine* get() const { return engine_; }

  migra_status open(const EngineOptions& opts) {
    json overrides = json::object();
    if (!opts.preset.empty()) overrides["preset"] = opts.preset;
    if (!opts.script.empty()) {
      overrides["provider"]["script_path"] = std::filesystem::absolute(opts.script).string();
    }
    for (const auto& f : opts.flags) {
      const auto eq = f.find('=');
      const auto name = f.substr(0, eq);
      const auto value = eq == std::string::npos ? std::string("true") : f.substr(eq + 1);
      if (value != "true" && value != "false") {
        std::cerr << "error: --flag expects name=true|false, got '" << f << "'\n";
        return MIGRA_EUSAGE;
      }
      overrides["flags"][name] = value == "true";
    }
    const auto text = overrides.empty() ? std::string() : overrides.dump();
    auto st = migra_engine_open(opts.config.c_str(), text.empty() ? nullptr : text.c_str(), &engine_);
    if (st == MIGRA_OK) migra_engine_set_force_unlock(engine_, opts.force_unlock);
    return st;
  }

 private:
  migra_engine* engine_ = nullptr;
};

// Takes ownership of a report string from the library.
json take(char* raw) {
  if (!raw) return json::object();
  auto j = json::parse(raw);
  migra_string_free(raw);
  return j;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void add_engine_options(CLI::App* cmd, EngineOptions& opts) {
  cmd->add_option("--config", opts.config, "Engine configuration file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--preset", opts.preset,
                  "Agent configuration: single_agent_baseline, single_agent_yt_specific, multi_agent, "
                  "multi_agent_yt_specific");
  cmd->add_option("--script", opts.script, "Scripted provider transcript, replacing the configured one");
  cmd->add_option("--flag", opts.flags,
                  "Override a flag: use_planner_orchestrator, include_client_playbook or "
                  "include_task_style_playbooks, as name=true|false");
  cmd->add_flag("--force-unlock", opts.force_unlock, "Clear a stale bank lock");
}

void print_run(const json& r, bool timings) {
  for (const auto& c : r["chunks"]) {
    std::string steps;
    for (const auto& s : c["steps"]) steps += (steps.empty() ? "" : ",") + std::to_string(s.get<long long>());
    std::cout << "chunk " << c["chunk"].get<std::size_t>() << " (steps " << steps << "): "
              << c["outcome"].get<std::string>();
    if (c["attempts"].get<int>() > 0) std::cout << " after " << c["attempts"].get<int>() << " attempt(s)";
    if (timings) std::cout << " in " << fixed4(c["wall_secs"].get<double>()) << " s";
    std::cout << "\n";
  }
  std::size_t done = 0;
  for (const auto& s : r["steps"]) {
    if (s["status"] == "done") ++done;
    else std::cout << "step " << s["step_id"].get<long long>() << ": " << s["status"].get<std::string>() << "\n";
  }
  std::cout << "run " << r["status"].get<std::string>() << ": " << done << "/" << r["steps"].size()
            << " steps done, " << r["coder_invocations"].get<std::size_t>() << " coder invocation(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plan, run and evaluate agent-driven code migrations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(migra_version()));

  EngineOptions eopts;

  auto* plan = app.add_subcommand("plan", "Plan the migration of a root file and store the plan in the memory bank");
  std::string plan_root;
  bool plan_overwrite = false;
  plan->add_option("--root", plan_root, "Workspace-relative root file (defaults to the configured root_file)");
  plan->add_flag("--overwrite", plan_overwrite, "Replace a plan already stored in the bank");
  add_engine_options(plan, eopts);

  auto* run = app.add_subcommand("run", "Execute the stored plan from the start");
  bool run_force = false, timings = false;
  std::optional<std::size_t> stop_after;
  run->add_flag("--force", run_force, "Start over even if a run exists or has finished");
  run->add_flag("--timings", timings, "Show wall-clock time per chunk");
  run->add_option("--stop-after-chunks", stop_after, "Stop cleanly after this many chunks (resume later)");
  add_engine_options(run, eopts);

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  resume->add_flag("--timings", timings, "Show wall-clock time per chunk");
  resume->add_option("--stop-after-chunks", stop_after, "Stop cleanly after this many chunks");
  add_engine_options(resume, eopts);

  auto* judge = app.add_subcommand("judge", "Score migrated code against a checklist");
  std::string checklist, judge_out, judge_model;
  std::vector<std::string> targets;
  int runs = 1;
  bool append = false;
  judge->add_option("--checklist", checklist, "Markdown checklist with '- [ ]' items")->required()->check(CLI::ExistingFile);
  judge->add_option("--targets", targets, "Workspace-relative prefixes the judge may read (default: target_root)");
  judge->add_option("--runs", runs, "Number of independent judge runs")->check(CLI::PositiveNumber);
  judge->add_option("--out", judge_out, "Scores file to write");
  judge->add_option("--model", judge_model, "Model label for the scores file (default: root file stem)");
  judge->add_flag("--append", append, "Add to an existing scores file instead of replacing it");
  add_engine_options(judge, eopts);

  auto* playbook = app.add_subcommand("playbook", "Playbook tools");
  playbook->require_subcommand(1);
  auto* gen = playbook->add_subcommand("gen", "Distil a client playbook from golden migrations");
  std::vector<std::vector<std::string>> golden;
  std::string gen_out, gen_name = "generated";
  bool review = false;
  gen->add_option("--golden", golden, "Legacy and migrated directories of one golden example")
      ->expected(2)
      ->required();
  gen->add_option("--out", gen_out, "Where to write the playbook")->required();
  gen->add_option("--name", gen_name, "Playbook name");
  gen->add_flag("--review", review, "Acknowledge human review; without it nothing is written");
  add_engine_options(gen, eopts);

  auto* viz = app.add_subcommand("viz", "Render the stored plan as Graphviz dot");
  std::string viz_out;
  viz->add_option("--out", viz_out, "Dot file to write (default: print)");
  add_engine_options(viz, eopts);

  auto* eval = app.add_subcommand("eval", "Evaluation tools");
  eval->require_subcommand(1);
  auto* compare = eval->add_subcommand("compare", "Compare two configurations with a paired t statistic");
  std::string file_a, file_b, cfg_a, cfg_b;
  compare->add_option("--a", file_a, "Scores file of configuration A")->required()->check(CLI::ExistingFile);
  compare->add_option("--b", file_b, "Scores file of configuration B")->required()->check(CLI::ExistingFile);
  compare->add_option("--a-config", cfg_a, "Configuration to take from file A");
  compare->add_option("--b-config", cfg_b, "Configuration to take from file B");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (compare->parsed()) {
    json req{{"a", file_a}, {"b", file_b}};
    if (!cfg_a.empty()) req["a_config"] = cfg_a;
    if (!cfg_b.empty()) req["b_config"] = cfg_b;
    char* raw = nullptr;
    const auto st = migra_eval_compare(req.dump().c_str(), &raw);
    if (st != MIGRA_OK) return report_error(st);
    const auto r = take(raw);
    for (const char* side : {"a", "b"}) {
      const auto& s = r[side];
      std::cout << "config " << (side[0] == 'a' ? "A" : "B") << ": " << s["config"].get<std::string>() << "\n";
      for (const auto& [model, m] : s["models"].items()) {
        std::cout << "  " << model << "  mean " << fixed4(m["mean"].get<double>()) << " over "
                  << m["runs"].get<std::size_t>() << " run(s)\n";
      }
      std::cout << "  total " << fixed4(s["total"].get<double>()) << "\n";
    }
    const double t = r["t"].get<double>();
    const double crit = r["critical_05"].get<double>();
    std::cout << "paired t = " << fixed4(t) << ", dof = " << r["dof"].get<int>() << "\n";
    std::cout << "two-sided 5% critical value for dof " << r["dof"].get<int>() << ": " << fixed4(crit) << " ("
              << (std::abs(t) > crit ? "exceeded" : "not exceeded") << "; no p-value is computed)\n";
    return 0;
  }

  Handle engine;
  if (auto st = engine.open(eopts); st != MIGRA_OK) {
    if (st == MIGRA_EUSAGE && migra_last_error()[0] == '\0') return 2;
    return report_error(st);
  }
  char* raw = nullptr;

  if (plan->parsed()) {
    json req{{"overwrite", plan_overwrite}};
    if (!plan_root.empty()) req["root"] = plan_root;
    const auto st = migra_plan(engine.get(), req.dump().c_str(), &raw);
    if (st != MIGRA_OK) return report_error(st);
    const auto r = take(raw);
    std::cout << "plan: " << r["steps"].get<std::size_t>() << " step(s) after " << r["rounds"].get<int>()
              << " planning round(s)\n";
    if (r["gaps_remaining"].get<bool>()) std::cout << "warning: round limit reached with file requests pending\n";
    std::cout << "plan hash " << r["plan_hash"].get<std::string>() << "\n";
    std::cout << "wrote " << r["plan_path"].get<std::string>() << "\n";
    std::cout << "wrote " << r["dot_path"].get<std::string>() << "\n";
    if (r["findings"].empty()) std::cout << "lint: no findings\n";
    for (const auto& f : r["findings"]) {
      std::cout << "lint " << f["severity"].get<std::string>() << " ";
      if (!f["step_id"].is_null()) std::cout << "step " << f["step_id"].get<long long>() << " ";
      std::cout << f["code"].get<std::string>() << ": " << f["message"].get<std::string>() << "\n";
    }
    return 0;
  }

  if (run->parsed() || resume->parsed()) {
    json req{{"force", run_force}};
    if (stop_after) req["stop_after_chunks"] = *stop_after;
    const auto st = run->parsed() ? migra_run(engine.get(), req.dump().c_str(), &raw)
                                  : migra_resume(engine.get(), req.dump().c_str(), &raw);
    if (st != MIGRA_OK && st != MIGRA_FAILED) return report_error(st);
    print_run(take(raw), timings);
    return exit_code(st);
  }

  if (judge->parsed()) {
    json req{{"checklist", checklist}, {"targets", targets}, {"runs", runs}, {"append", append}};
    if (!judge_out.empty()) req["out"] = judge_out;
    if (!judge_model.empty()) req["model"] = judge_model;
    const auto st = migra_judge(engine.get(), req.dump().c_str(), &raw);
    if (st != MIGRA_OK) return report_error(st);
    const auto r = take(raw);
    const auto n = r["items"].get<std::size_t>();
    for (const auto& run_r : r["runs"]) {
      std::size_t passed = 0;
      for (const auto& it : run_r["items"]) passed += it["pass"].get<bool>();
      std::cout << "run " << run_r["run_id"].get<std::string>() << ": score " << fixed4(run_r["score"].get<double>())
                << " (" << passed << "/" << n << " items)\n";
    }
    std::cout << "mean score " << fixed4(r["mean"].get<double>()) << " over " << r["runs"].size() << " run(s)\n";
    if (!r["out"].is_null()) std::cout << "wrote " << r["out"].get<std::string>() << "\n";
    return 0;
  }

  if (gen->parsed()) {
    json pairs = json::array();
    for (const auto& g : golden) pairs.push_back(g);
    json req{{"golden", pairs}, {"out", gen_out}, {"review", review}, {"name", gen_name}};
    const auto st = migra_playbook_generate(engine.get(), req.dump().c_str(), &raw);
    if (st != MIGRA_OK) return report_error(st);
    const auto r = take(raw);
    if (r["written"].is_null()) {
      std::cout << r["body"].get<std::string>();
      std::cout << "\nnot written: review the playbook above, then rerun with --review to write " << gen_out << "\n";
    } else {
      std::cout << "wrote " << r["written"].get<std::string>() << " (" << r["calls"].get<std::size_t>()
                << " provider calls, version " << r["version"].get<std::string>().substr(0, 12) << ")\n";
    }
    return 0;
  }

  if (viz->parsed()) {
    const auto st = migra_viz(engine.get(), viz_out.empty() ? nullptr : viz_out.c_str(), &raw);
    if (st != MIGRA_OK) return report_error(st);
    const auto r = take(raw);
    if (r["out"].is_null()) std::cout << r["dot"].get<std::string>();
    else std::cout << "wrote " << r["out"].get<std::string>() << "\n";
    return 0;
  }
  return 2;
}
