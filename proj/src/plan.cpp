#include "migra/plan.hpp"

#include "migra/digest.hpp"
#include "migra/error.hpp"
#include "migra/fs_util.hpp"
#include "migra/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace migra {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string step_label(const PlanStep& s) { return "step " + std::to_string(s.step_id); }

void check_step_fields(const PlanStep& s) {
  if (s.step_id < 1) throw Error(ErrorCode::InvalidStep, "step_id must be >= 1, got " + std::to_string(s.step_id));
  if (s.target_files.empty()) throw Error(ErrorCode::InvalidStep, step_label(s) + ": target_files is empty");
  auto check_list = [&](const std::vector<std::string>& files, const char* field) {
    std::set<std::string> seen;
    for (const auto& f : files) {
      if (f.empty()) throw Error(ErrorCode::InvalidStep, step_label(s) + ": empty path in " + field);
      if (!seen.insert(f).second) {
        throw Error(ErrorCode::InvalidStep, step_label(s) + ": duplicate path '" + f + "' in " + field);
      }
    }
  };
  check_list(s.source_files, "source_files");
  check_list(s.target_files, "target_files");
}

// Depth-first search for a dependency cycle among known ids.
bool has_cycle(const std::vector<PlanStep>& steps) {
  std::map<StepId, const PlanStep*> by_id;
  for (const auto& s : steps) by_id[s.step_id] = &s;
  std::map<StepId, int> color;  // 0 white, 1 grey, 2 black
  std::vector<std::pair<StepId, std::size_t>> stack;
  for (const auto& s : steps) {
    if (color[s.step_id] != 0) continue;
    stack.push_back({s.step_id, 0});
    color[s.step_id] = 1;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const auto& deps = by_id[id]->dependencies;
      if (next < deps.size()) {
        const StepId d = deps[next++];
        const int c = color[d];
        if (c == 1) return true;
        if (c == 0) {
          color[d] = 1;
          stack.push_back({d, 0});
        }
      } else {
        color[id] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

std::vector<std::string> string_list(const ordered_json& j, const char* field, StepId id) {
  if (!j.is_array()) {
    throw Error(ErrorCode::MalformedDocument, "step " + std::to_string(id) + ": '" + field + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) {
      throw Error(ErrorCode::MalformedDocument,
                  "step " + std::to_string(id) + ": '" + field + "' must contain strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string required_string(const ordered_json& step, const char* field, StepId id) {
  auto it = step.find(field);
  if (it == step.end()) {
    throw Error(ErrorCode::MalformedDocument, "step " + std::to_string(id) + ": missing field '" + field + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::MalformedDocument, "step " + std::to_string(id) + ": '" + field + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

MigrationPlan MigrationPlan::from_steps(std::vector<PlanStep> steps) {
  if (steps.empty()) throw Error(ErrorCode::EmptyPlan, "plan has no steps");
  for (const auto& s : steps) check_step_fields(s);

  std::map<StepId, std::size_t> position;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!position.emplace(steps[i].step_id, i).second) {
      throw Error(ErrorCode::DuplicateStepId, "step_id " + std::to_string(steps[i].step_id) + " appears twice");
    }
  }
  for (const auto& s : steps) {
    for (StepId d : s.dependencies) {
      if (!position.count(d)) {
        throw Error(ErrorCode::UnknownDependency,
                    step_label(s) + " depends on undefined step " + std::to_string(d));
      }
    }
  }
  if (has_cycle(steps)) throw Error(ErrorCode::CyclicDependency, "step dependencies contain a cycle");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (StepId d : steps[i].dependencies) {
      if (position[d] >= i) {
        throw Error(ErrorCode::ForwardDependency,
                    step_label(steps[i]) + " depends on step " + std::to_string(d) + " which appears later");
      }
    }
  }

  MigrationPlan plan;
  plan.steps_ = std::move(steps);
  plan.hash_ = sha256_hex(serialize_steps(plan.steps_));
  return plan;
}

const PlanStep& MigrationPlan::step(StepId id) const {
  for (const auto& s : steps_)
    if (s.step_id == id) return s;
  throw Error(ErrorCode::UnknownDependency, "no step " + std::to_string(id));
}

bool MigrationPlan::contains(StepId id) const noexcept {
  return std::any_of(steps_.begin(), steps_.end(), [id](const PlanStep& s) { return s.step_id == id; });
}

MigrationPlan parse_plan(std::string_view text) {
  if (!is_valid_utf8(text)) throw Error(ErrorCode::MalformedDocument, "plan is not valid UTF-8");
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "plan must be a JSON object");
  auto steps_it = doc.find("steps");
  if (steps_it == doc.end() || !steps_it->is_array()) {
    throw Error(ErrorCode::MalformedDocument, "plan requires a 'steps' array");
  }
  if (steps_it->empty()) throw Error(ErrorCode::EmptyPlan, "plan has no steps");

  std::vector<PlanStep> steps;
  for (const auto& js : *steps_it) {
    if (!js.is_object()) throw Error(ErrorCode::MalformedDocument, "each step must be an object");
    PlanStep s;
    auto id_it = js.find("step_id");
    if (id_it == js.end()) throw Error(ErrorCode::MalformedDocument, "step missing 'step_id'");
    if (!id_it->is_number_integer()) throw Error(ErrorCode::MalformedDocument, "'step_id' must be an integer");
    s.step_id = id_it->get<StepId>();
    s.title = required_string(js, "title", s.step_id);
    if (auto it = js.find("source_files"); it != js.end()) s.source_files = string_list(*it, "source_files", s.step_id);
    auto tf = js.find("target_files");
    if (tf == js.end()) {
      throw Error(ErrorCode::MalformedDocument, "step " + std::to_string(s.step_id) + ": missing field 'target_files'");
    }
    s.target_files = string_list(*tf, "target_files", s.step_id);
    s.instructions = required_string(js, "instructions", s.step_id);
    s.validation = required_string(js, "validation", s.step_id);
    if (auto it = js.find("dependencies"); it != js.end()) {
      if (!it->is_array()) throw Error(ErrorCode::MalformedDocument, "'dependencies' must be an array");
      for (const auto& d : *it) {
        if (!d.is_number_integer()) throw Error(ErrorCode::MalformedDocument, "dependencies must be integers");
        s.dependencies.push_back(d.get<StepId>());
      }
    }
    steps.push_back(std::move(s));
  }
  return MigrationPlan::from_steps(std::move(steps));
}

std::string serialize_steps(const std::vector<PlanStep>& steps) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : steps) {
    ordered_json js;
    js["step_id"] = s.step_id;
    js["title"] = s.title;
    js["source_files"] = s.source_files;
    js["target_files"] = s.target_files;
    js["instructions"] = s.instructions;
    js["validation"] = s.validation;
    js["dependencies"] = s.dependencies;
    arr.push_back(std::move(js));
  }
  ordered_json doc;
  doc["steps"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::string serialize_plan(const MigrationPlan& plan) { return serialize_steps(plan.steps()); }

std::string_view to_string(Severity s) noexcept { return s == Severity::Error ? "error" : "warning"; }

std::string_view to_string(LintCode c) noexcept {
  switch (c) {
    case LintCode::MissingSource: return "MISSING_SOURCE";
    case LintCode::OversizedStep: return "OVERSIZED_STEP";
    case LintCode::EmptyInstructions: return "EMPTY_INSTRUCTIONS";
    case LintCode::OrphanStep: return "ORPHAN_STEP";
  }
  return "UNKNOWN";
}

std::vector<LintFinding> validate_plan(const MigrationPlan& plan, const Workspace& workspace,
                                       const LintOptions& options) {
  std::vector<LintFinding> findings;
  for (const auto& s : plan.steps()) {
    std::size_t lines = 0;
    for (const auto& src : s.source_files) {
      if (!workspace.is_file(src)) {
        findings.push_back({s.step_id, Severity::Error, LintCode::MissingSource,
                            "source file not found in workspace: " + src});
        continue;
      }
      lines += count_lines(workspace.read(src));
      for (const auto& prefix : options.excluded_prefixes) {
        if (path_under(src, prefix)) {
          findings.push_back({s.step_id, Severity::Error, LintCode::OrphanStep,
                              "source file " + src + " belongs to excluded library prefix " + prefix});
          break;
        }
      }
    }
    if (lines > options.oversized_budget) {
      findings.push_back({s.step_id, Severity::Warning, LintCode::OversizedStep,
                          "source files total " + std::to_string(lines) + " lines, budget is " +
                              std::to_string(options.oversized_budget)});
    }
    if (s.instructions.find_first_not_of(" \t\r\n") == std::string::npos) {
      findings.push_back({s.step_id, Severity::Error, LintCode::EmptyInstructions, "instructions are empty"});
    }
  }
  std::stable_sort(findings.begin(), findings.end(), [](const LintFinding& a, const LintFinding& b) {
    const StepId ia = a.step_id.value_or(0), ib = b.step_id.value_or(0);
    if (ia != ib) return ia < ib;
    return to_string(a.code) < to_string(b.code);
  });
  return findings;
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plan_dot(const MigrationPlan& plan) {
  std::ostringstream os;
  os << "digraph plan {\n";
  os << "  node [shape=box];\n";
  for (const auto& s : plan.steps()) {
    os << "  " << s.step_id << " [label=\"" << dot_escape(std::to_string(s.step_id) + ": " + s.title) << "\"];\n";
  }
  for (const auto& s : plan.steps()) {
    for (StepId d : s.dependencies) os << "  " << d << " -> " << s.step_id << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace migra
