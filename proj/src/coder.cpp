#include "migra/coder.hpp"

#include "migra/error.hpp"
#include "migra/fence.hpp"
#include "migra/provider.hpp"
#include "migra/workspace.hpp"

#include <json.hpp>

#include <algorithm>

namespace migra {

const char* const kBuildGateReminder =
    "You declared the sub-step done, but there is no passing run_build after your last edit. "
    "Always build before declaring completion: call run_build, fix any failure, then reply with "
    "```done again.";

const char* const kReviewPromptHeader =
    "SELF-REVIEW: before this sub-step is closed, verify that it has been completed successfully. "
    "Check every validation condition below against the workspace.";

const char* const kFormatReminder =
    "Your reply contained no action. Reply with exactly one ```tool block, or ```done when the "
    "sub-step is complete and the build passes, or ```abort with a reason.";

namespace {

constexpr const char* kCoderPreamble =
    "You are the coding agent of a code migration system. You carry out one sub-step of a "
    "migration plan using the workspace tools, building and testing each change and fixing any "
    "failure you encounter.";

constexpr const char* kToolProtocol =
    "## Tools\n"
    "Call one tool per reply with a fenced block:\n"
    "```tool\n"
    "{\"tool\": \"read_file\", \"args\": {\"path\": \"pkg/a.py\"}}\n"
    "```\n"
    "Available tools and arguments:\n"
    "- list_files {path}\n"
    "- read_file {path}\n"
    "- write_file {path, content}\n"
    "- grep {pattern, path, regex (\"true\" for a regular expression)}\n"
    "- search_replace {path, search, replace}\n"
    "- run_build {}\n"
    "- run_test {}\n"
    "When the sub-step is complete and run_build passes, reply with an empty ```done block.\n"
    "If the sub-step cannot be completed, reply with an ```abort block stating the reason.\n";

constexpr const char* kSummaryPrompt =
    "The review passed. Write the summary of this sub-step for the memory bank as one ```summary "
    "block in markdown with the sections \"## 1. Changes Made\" and \"## 2. Key Fixes & "
    "Learnings\".";

constexpr const char* kSummaryReminder =
    "The summary must be one ```summary block containing both a \"Changes Made\" section and a "
    "\"Key Fixes & Learnings\" section. Write it again.";

constexpr const char* kReviewReminder =
    "Reply to the self-review with an empty ```confirmed block if every condition holds, or continue "
    "working with a ```tool block.";

constexpr const char* kSingleToolReminder =
    "Note: only the first tool block of your reply was executed; send one tool call per reply.";

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out.empty() ? "(none)" : out;
}

std::string render_task(const CoderContext& ctx, const Workspace& ws) {
  std::string p = "# Sub-step " + std::to_string(ctx.substep.chunk_index) + " (attempt " + std::to_string(ctx.attempt) + ")\n\n";
  p += "## Steps\n\n";
  for (const auto& s : ctx.steps) {
    p += "### Step " + std::to_string(s.step_id) + ": " + s.title + "\n";
    p += "Source files: " + join(s.source_files) + "\n";
    p += "Target files: " + join(s.target_files) + "\n";
    std::vector<std::string> deps;
    for (auto d : s.dependencies) deps.push_back(std::to_string(d));
    p += "Depends on: " + join(deps) + "\n";
    p += "Instructions:\n" + s.instructions + "\n";
    p += "Validation:\n" + s.validation + "\n\n";
  }
  p += "## Workspace\n";
  p += "Build command: " + ws.build_cmd().value_or("(none configured)") + " (run_build)\n";
  p += "Test command: " + ws.test_cmd().value_or("(none configured)") + " (run_test)\n\n";
  p += "## Summaries of completed sub-steps\n\n";
  if (ctx.prior_summaries.empty()) p += "None yet.\n\n";
  for (std::size_t i = 0; i < ctx.prior_summaries.size(); ++i) {
    p += "### Summary " + std::to_string(i + 1) + "\n" + ctx.prior_summaries[i];
    if (p.back() != '\n') p += '\n';
    p += '\n';
  }
  if (!ctx.retry_note.empty()) {
    p += "## Previous attempt failed\n" + ctx.retry_note;
    if (p.back() != '\n') p += '\n';
    p += '\n';
  }
  p += kToolProtocol;
  return p;
}

std::string render_review(const CoderContext& ctx) {
  std::string p = kReviewPromptHeader;
  p += "\n\n";
  for (const auto& s : ctx.steps) p += "- Step " + std::to_string(s.step_id) + ": " + s.validation + "\n";
  p += "\nIf every condition holds reply with an empty ```confirmed block. Otherwise continue working "
       "with ```tool calls and declare ```done again when finished.";
  return p;
}

// nullopt = malformed envelope.
std::optional<ToolCall> parse_tool_call(const std::string& block, std::string& problem) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(block);
  } catch (const nlohmann::json::exception& e) {
    problem = std::string("tool block is not JSON: ") + e.what();
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains("tool") || !j["tool"].is_string()) {
    problem = "tool block must be an object with a string \"tool\"";
    return std::nullopt;
  }
  ToolCall call;
  call.tool = j["tool"].get<std::string>();
  if (j.contains("args")) {
    if (!j["args"].is_object()) {
      problem = "\"args\" must be an object";
      return std::nullopt;
    }
    for (const auto& [k, v] : j["args"].items()) {
      if (v.is_string()) call.args[k] = v.get<std::string>();
      else if (v.is_boolean() || v.is_number()) call.args[k] = v.dump();
      else {
        problem = "argument \"" + k + "\" must be a string";
        return std::nullopt;
      }
    }
  }
  return call;
}

}  // namespace

bool summary_has_sections(std::string_view body) noexcept {
  return body.find("Changes Made") != std::string_view::npos &&
         body.find("Key Fixes & Learnings") != std::string_view::npos;
}

CoderOutcome execute_substep(const CoderContext& ctx, const Workspace& workspace, CompletionProvider& provider,
                             const CoderOptions& options) {
  enum class Phase { Work, Review, Summary };
  CoderOutcome out;
  std::vector<ChatMessage> conversation;
  std::string system = kCoderPreamble;
  if (!ctx.system_prompt.empty()) system += "\n\n" + ctx.system_prompt;
  conversation.push_back({Role::System, std::move(system)});
  conversation.push_back({Role::User, render_task(ctx, workspace)});

  Phase phase = Phase::Work;
  int turn_n = 0, review_n = 0, summary_n = 0;
  bool build_after_edit = false;
  bool summary_retried = false;
  std::string last_failure;
  const std::string tag_prefix =
      "coder.chunk." + std::to_string(ctx.substep.chunk_index) + ".attempt." + std::to_string(ctx.attempt) + ".";

  auto run_tool = [&](const std::string& block, bool extra_blocks) {
    std::string problem;
    auto call = parse_tool_call(block, problem);
    std::string msg;
    if (!call) {
      msg = "TOOL ERROR: " + problem + "\n" + kFormatReminder;
    } else {
      const auto result = dispatch_tool(workspace, *call);
      const auto kind = parse_tool_kind(call->tool);
      if (result.ok && kind && (*kind == ToolKind::WriteFile || *kind == ToolKind::SearchReplace)) {
        build_after_edit = false;
        const auto path = confine_path(workspace, call->args.at("path"));
        if (std::find(out.files_changed.begin(), out.files_changed.end(), path) == out.files_changed.end()) {
          out.files_changed.push_back(path);
        }
      }
      if (kind == ToolKind::RunBuild) {
        out.build_ok = result.ok;
        build_after_edit = result.ok;
      }
      if (kind == ToolKind::RunTest && result.error_code != ErrorCode::CommandUnavailable) out.test_ok = result.ok;
      msg = "TOOL RESULT " + call->tool + ": ";
      if (result.ok) {
        msg += "ok\n";
      } else {
        msg += "FAILED (" + std::string(to_string(*result.error_code)) + ")\n";
        last_failure = call->tool + " failed:\n" + result.output;
      }
      msg += result.output;
    }
    if (extra_blocks) {
      if (msg.back() != '\n') msg += '\n';
      msg += kSingleToolReminder;
    }
    conversation.push_back({Role::User, std::move(msg)});
  };

  auto fail = [&](std::string reason) {
    out.status = CoderStatus::Failure;
    out.failure_reason = std::move(reason);
    if (!last_failure.empty()) out.failure_reason += "\nLast tool failure: " + last_failure;
    return out;
  };

  while (out.iterations_used < options.max_iterations) {
    CompletionRequest req;
    req.messages = conversation;
    req.temperature = options.temperature;
    switch (phase) {
      case Phase::Work: req.tag = tag_prefix + "turn." + std::to_string(++turn_n); break;
      case Phase::Review: req.tag = tag_prefix + "review." + std::to_string(++review_n); break;
      case Phase::Summary: req.tag = tag_prefix + "summary." + std::to_string(++summary_n); break;
    }
    ++out.iterations_used;
    const auto reply = provider.complete(req).content;
    conversation.push_back({Role::Assistant, reply});

    const auto blocks = extract_fenced_blocks(reply);
    auto find = [&](std::string_view info) -> const FencedBlock* {
      for (const auto& b : blocks)
        if (b.info == info) return &b;
      return nullptr;
    };
    const auto tool_count = count_blocks(reply, "tool");

    if (const auto* abort = find("abort")) return fail("coder aborted: " + abort->content);

    if (phase == Phase::Summary) {
      const auto* summary = find("summary");
      if (summary && summary_has_sections(summary->content)) {
        out.status = CoderStatus::Success;
        out.summary = summary->content;
        return out;
      }
      if (summary_retried) return fail("MalformedSummary: summary lacks the required sections after one retry");
      summary_retried = true;
      conversation.push_back({Role::User, kSummaryReminder});
      continue;
    }

    if (const auto* tool = find("tool")) {
      phase = Phase::Work;
      run_tool(tool->content, tool_count > 1);
      continue;
    }

    if (phase == Phase::Review) {
      if (find("confirmed")) {
        phase = Phase::Summary;
        conversation.push_back({Role::User, kSummaryPrompt});
      } else {
        conversation.push_back({Role::User, kReviewReminder});
      }
      continue;
    }

    if (find("done")) {
      ++out.done_emissions;
      if (!build_after_edit) {
        conversation.push_back({Role::User, kBuildGateReminder});
        continue;
      }
      ++out.accepted_dones;
      ++out.review_prompts;
      phase = Phase::Review;
      conversation.push_back({Role::User, render_review(ctx)});
      continue;
    }

    conversation.push_back({Role::User, kFormatReminder});
  }
  return fail("iteration budget of " + std::to_string(options.max_iterations) + " provider calls exhausted");
}

}  // namespace migra
