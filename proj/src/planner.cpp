#include "migra/planner.hpp"

#include "migra/error.hpp"
#include "migra/fence.hpp"
#include "migra/memory_bank.hpp"
#include "migra/playbook.hpp"
#include "migra/provider.hpp"
#include "migra/workspace.hpp"

#include <algorithm>
#include <set>

namespace migra {

namespace {

constexpr const char* kPlannerPreamble =
    "You are the planning agent of a code migration system. You do not write code. You study the "
    "root file and its dependencies and produce a migration plan of disjoint steps, each of which "
    "leaves the code in a state that builds.";

bool excluded(std::string_view path, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const auto& p) { return path_under(path, p); });
}

std::string extension_of(std::string_view path) {
  auto ext = std::filesystem::path(std::string(path)).extension().string();
  if (!ext.empty()) ext.erase(0, 1);
  return ext.empty() ? "text" : ext;
}

std::string build_prompt(const std::map<std::string, std::string>& context_files, const PlannerRoundInput& input,
                         int round_index, const PlannerOptions& options) {
  std::string p = "# Migration planning, round " + std::to_string(round_index) + "\n\n";
  p += "Root file: " + input.root_file + "\n\n";

  p += "## Migration order (dependencies first)\n";
  std::vector<std::string> available;
  int n = 0;
  for (const auto& cluster : input.order.clusters) {
    std::vector<std::string> members;
    for (const auto& m : cluster) {
      if (excluded(m, options.excluded_prefixes)) available.push_back(m);
      else members.push_back(m);
    }
    if (members.empty()) continue;
    p += std::to_string(++n) + ". ";
    for (std::size_t i = 0; i < members.size(); ++i) p += (i ? ", " : "") + members[i];
    if (members.size() > 1) p += "  (import cycle, migrate together)";
    p += "\n";
  }
  p += "\n";

  if (!input.externals.empty()) {
    p += "## External imports (outside the workspace)\n";
    for (const auto& e : input.externals) p += "- " + e + "\n";
    p += "\n";
  }
  if (!options.excluded_prefixes.empty()) {
    p += "## Ready-to-use libraries (use as-is, never plan steps for them)\n";
    for (const auto& e : options.excluded_prefixes) p += "- " + e + "\n";
    for (const auto& a : available) p += "- " + a + " (available)\n";
    p += "\n";
  }
  if (!input.refused.empty()) {
    p += "## Refused file requests\n";
    for (const auto& [path, why] : input.refused) p += "- " + path + ": " + why + "\n";
    p += "\n";
  }

  p += "## Files\n\n";
  for (const auto& [path, content] : context_files) {
    p += "### " + path + "\n";
    p += make_fence(extension_of(path), content);
    p += "\n";
  }

  p +=
      "## Response format\n"
      "Reply with one ```plan block holding the plan as a JSON object {\"steps\": [...]}. Each step has\n"
      "\"step_id\" (integer, unique), \"title\", \"source_files\", \"target_files\" (non-empty),\n"
      "\"instructions\", \"validation\" and \"dependencies\" (ids of earlier steps).\n"
      "If dependencies you have not seen are needed to fill gaps in the plan, also reply with a\n"
      "```requests block listing one workspace-relative path per line. Omit the requests block\n"
      "when the plan is complete.\n";
  return p;
}

std::vector<std::string> parse_requests(const std::string& block) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto eol = block.find('\n', pos);
    if (eol == std::string::npos) eol = block.size();
    std::string line = block.substr(pos, eol - pos);
    pos = eol + 1;
    const auto b = line.find_first_not_of(" \t\r-*");
    const auto e = line.find_last_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, e - b + 1);
    if (std::find(out.begin(), out.end(), line) == out.end()) out.push_back(line);
  }
  return out;
}

}  // namespace

PlannerRoundResult plan_round(const std::map<std::string, std::string>& context_files, const PlannerRoundInput& input,
                              const PlaybookSet& playbooks, CompletionProvider& provider, int round_index,
                              const PlannerOptions& options) {
  if (!context_files.count(input.root_file)) {
    throw Error(ErrorCode::InvalidRequest, "root file " + input.root_file + " missing from planner context");
  }
  CompletionRequest req;
  std::string system = kPlannerPreamble;
  const auto pb = assemble_system_prompt(playbooks);
  if (!pb.empty()) system += "\n\n" + pb;
  req.messages = {{Role::System, std::move(system)},
                  {Role::User, build_prompt(context_files, input, round_index, options)}};
  req.temperature = options.temperature;
  req.tag = "planner.round." + std::to_string(round_index);
  const auto reply = provider.complete(req);

  PlannerRoundResult result;
  result.round_index = round_index;
  auto plan = first_block(reply.content, "plan");
  if (!plan) throw Error(ErrorCode::MissingPlanBlock, "planner round " + std::to_string(round_index) + ": no ```plan block");
  result.plan_text = std::move(*plan);
  if (auto requests = first_block(reply.content, "requests")) {
    result.requested_files = parse_requests(*requests);
    for (const auto& r : result.requested_files) {
      if (context_files.count(r)) {
        throw Error(ErrorCode::RepeatRequest,
                    "planner round " + std::to_string(round_index) + " re-requested already supplied " + r);
      }
    }
  }
  return result;
}

PlanningResult plan_migration(std::string_view root_file, const Workspace& workspace, const PlaybookSet& playbooks,
                              CompletionProvider& provider, const PlannerOptions& options, const MemoryBank* bank) {
  const auto graph = build_graph(root_file, workspace, options.imports);
  PlannerRoundInput input;
  input.root_file = confine_path(workspace, root_file);
  input.order = leaf_first_order(graph);
  input.externals.assign(graph.externals.begin(), graph.externals.end());

  std::map<std::string, std::string> context;
  context[input.root_file] = workspace.read(input.root_file);
  for (const auto& [from, to] : graph.edges) {
    if (from == input.root_file && !excluded(to, options.excluded_prefixes)) context[to] = workspace.read(to);
  }

  const int max_rounds = std::max(1, options.max_rounds);
  bool gaps_remaining = false;
  std::string last_plan;
  int round = 1;
  for (;; ++round) {
    auto r = plan_round(context, input, playbooks, provider, round, options);
    last_plan = std::move(r.plan_text);
    if (r.converged()) break;
    if (round == max_rounds) {
      gaps_remaining = true;
      break;
    }
    input.refused.clear();
    for (const auto& path : r.requested_files) {
      std::string rel;
      try {
        rel = confine_path(workspace, path);
      } catch (const Error&) {
        input.refused.emplace_back(path, "outside the workspace");
        continue;
      }
      if (excluded(rel, options.excluded_prefixes)) {
        input.refused.emplace_back(path, "ready-to-use library, not supplied");
      } else if (!workspace.is_file(rel)) {
        input.refused.emplace_back(path, "no such file");
      } else if (context.count(rel)) {
        input.refused.emplace_back(path, "already supplied");
      } else {
        context[rel] = workspace.read(rel);
      }
    }
  }

  auto parsed = [&] {
    try {
      return parse_plan(last_plan);
    } catch (const Error& e) {
      rethrow_with_context(e, "planner round " + std::to_string(round));
    }
  }();
  PlanningResult out{std::move(parsed), round, gaps_remaining, {}};
  LintOptions lint;
  lint.excluded_prefixes = options.excluded_prefixes;
  out.findings = validate_plan(out.plan, workspace, lint);
  if (bank) bank->save_plan(out.plan);
  return out;
}

}  // namespace migra
