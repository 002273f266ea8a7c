#include "migra/judge.hpp"

#include "migra/error.hpp"
#include "migra/fence.hpp"
#include "migra/provider.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <map>

namespace migra {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    lines.push_back(text.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return lines;
}

}  // namespace

Checklist parse_checklist(std::string_view markdown) {
  Checklist cl;
  std::size_t line_no = 0;
  for (auto raw : split_lines(markdown)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.rfind("## ", 0) == 0) {
      cl.sections.push_back({std::string(trim(line.substr(3))), {}});
      continue;
    }
    if (line.rfind("# ", 0) == 0) {
      if (cl.title.empty()) cl.title = std::string(trim(line.substr(2)));
      continue;
    }
    if (line.rfind("- [", 0) != 0 && line.rfind("* [", 0) != 0) continue;
    const auto where = "line " + std::to_string(line_no);
    if (line.size() < 5 || line[4] != ']') throw Error(ErrorCode::MalformedCheckbox, where + ": " + std::string(line));
    const char mark = line[3];
    if (mark == 'x' || mark == 'X') throw Error(ErrorCode::PreCheckedItem, where + ": checklist items must be blank");
    if (mark != ' ') throw Error(ErrorCode::MalformedCheckbox, where + ": " + std::string(line));
    const auto text = trim(line.substr(5));
    if (text.empty() || line.size() < 6 || line[5] != ' ') {
      throw Error(ErrorCode::MalformedCheckbox, where + ": checkbox without item text");
    }
    if (cl.sections.empty()) cl.sections.push_back({"", {}});
    cl.items.emplace_back(text);
    cl.sections.back().items.push_back(cl.items.size());
  }
  if (cl.items.empty()) throw Error(ErrorCode::NoItems, "checklist has no '- [ ]' items");
  // Headings with no items under them carry no information for scoring.
  cl.sections.erase(std::remove_if(cl.sections.begin(), cl.sections.end(), [](const auto& s) { return s.items.empty(); }),
                    cl.sections.end());
  return cl;
}

ChecklistVerdict parse_verdict(std::string_view block, std::size_t item_count) {
  std::map<std::size_t, ItemVerdict> seen;
  for (auto raw : split_lines(block)) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::MalformedVerdict, why + ": '" + std::string(line) + "'");
    };
    if (line.rfind("ITEM ", 0) != 0) fail("expected 'ITEM <n>: PASS|FAIL -- <evidence>'");
    std::size_t i = 5;
    std::size_t index = 0;
    const auto digits_start = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
      index = index * 10 + static_cast<std::size_t>(line[i] - '0');
      if (index > 1'000'000) fail("item index out of range");
      ++i;
    }
    if (i == digits_start || i >= line.size() || line[i] != ':') fail("expected 'ITEM <n>:'");
    auto rest = trim(line.substr(i + 1));
    bool pass;
    if (rest.rfind("PASS", 0) == 0) pass = true;
    else if (rest.rfind("FAIL", 0) == 0) pass = false;
    else fail("expected PASS or FAIL");
    rest = trim(rest.substr(4));
    if (rest.rfind("--", 0) != 0) fail("expected '--' before the evidence");
    const auto evidence = trim(rest.substr(2));
    if (evidence.empty()) fail("evidence is mandatory");
    if (index < 1 || index > item_count) {
      throw Error(ErrorCode::UnknownItem, "verdict names item " + std::to_string(index) + " but the checklist has " +
                                              std::to_string(item_count) + " items");
    }
    if (seen.count(index)) fail("item " + std::to_string(index) + " judged twice");
    seen[index] = ItemVerdict{index, pass, std::string(evidence)};
  }
  if (seen.size() != item_count) {
    std::string missing;
    for (std::size_t k = 1; k <= item_count; ++k) {
      if (!seen.count(k)) missing += (missing.empty() ? "" : ", ") + std::to_string(k);
    }
    throw Error(ErrorCode::MissingItems, "verdict omits items " + missing);
  }
  ChecklistVerdict v;
  for (auto& [k, item] : seen) v.items.push_back(std::move(item));
  v.score = score_verdict(v);
  return v;
}

double score_verdict(const ChecklistVerdict& verdict) noexcept {
  if (verdict.items.empty()) return 0.0;
  const auto passed = std::count_if(verdict.items.begin(), verdict.items.end(), [](const auto& i) { return i.pass; });
  return static_cast<double>(passed) / static_cast<double>(verdict.items.size());
}

namespace {

constexpr const char* kJudgePreamble =
    "You are an impartial judge auditing a migrated code base against a checklist. You can only "
    "see the migrated files. Explore the code from the main model file outwards and ground every "
    "decision in what you read.";

constexpr const char* kJudgeReminder =
    "Reply with one ```tool block (list_files, read_file or grep) or with the final ```verdict block.";

std::string render_task(const Checklist& checklist, const std::vector<std::string>& roots) {
  std::string p = "# Audit\n\n## Migrated code locations\n";
  for (const auto& r : roots) p += "- " + r + "\n";
  p += "\n## Checklist\n";
  if (!checklist.title.empty()) p += "Title: " + checklist.title + "\n";
  for (const auto& section : checklist.sections) {
    if (!section.heading.empty()) p += "\n### " + section.heading + "\n";
    for (auto idx : section.items) p += std::to_string(idx) + ". " + checklist.items[idx - 1] + "\n";
  }
  p +=
      "\n## Tools\n"
      "Call one tool per reply with a fenced block, for example\n"
      "```tool\n{\"tool\": \"read_file\", \"args\": {\"path\": \"<file>\"}}\n```\n"
      "Available: list_files {path}, read_file {path}, grep {pattern, path, regex}.\n\n"
      "## Verdict\n"
      "When done, reply with one ```verdict block containing exactly one line per item:\n"
      "ITEM <n>: PASS -- <evidence>   or   ITEM <n>: FAIL -- <evidence>\n";
  return p;
}

}  // namespace

JudgeResult judge_migration(const Checklist& checklist, const std::vector<std::string>& target_roots,
                            const Workspace& workspace, CompletionProvider& provider, const JudgeOptions& options) {
  if (target_roots.empty()) throw Error(ErrorCode::InvalidRequest, "judge needs at least one target root");
  if (checklist.items.empty()) throw Error(ErrorCode::NoItems, "checklist has no items");
  DispatchOptions dispatch;
  dispatch.allowed_roots = target_roots;
  dispatch.allowed_tools = std::vector<ToolKind>{ToolKind::ListFiles, ToolKind::ReadFile, ToolKind::Grep};

  JudgeResult result;
  std::vector<ChatMessage> conversation{{Role::System, kJudgePreamble},
                                        {Role::User, render_task(checklist, target_roots)}};
  bool retried = false;
  const auto prefix = "judge.run." + std::to_string(options.run_index) + ".turn.";
  while (result.iterations < options.max_iterations) {
    CompletionRequest req;
    req.messages = conversation;
    req.temperature = options.temperature;
    req.tag = prefix + std::to_string(++result.iterations);
    const auto reply = provider.complete(req).content;
    conversation.push_back({Role::Assistant, reply});

    if (auto verdict = first_block(reply, "verdict")) {
      try {
        result.verdict = parse_verdict(*verdict, checklist.size());
        return result;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedVerdict || retried) throw;
        retried = true;
        conversation.push_back({Role::User, std::string("The verdict could not be parsed (") + e.what() +
                                                "). Send the complete ```verdict block again."});
        continue;
      }
    }
    if (auto block = first_block(reply, "tool")) {
      ToolCall call;
      std::string msg;
      try {
        const auto j = nlohmann::json::parse(*block);
        call.tool = j.at("tool").get<std::string>();
        if (j.contains("args")) {
          for (const auto& [k, v] : j.at("args").items()) call.args[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      } catch (const nlohmann::json::exception& e) {
        conversation.push_back({Role::User, std::string("TOOL ERROR: malformed tool block: ") + e.what()});
        continue;
      }
      auto tr = dispatch_tool(workspace, call, dispatch);
      msg = "TOOL RESULT " + call.tool + ": " +
            (tr.ok ? std::string("ok") : "FAILED (" + std::string(to_string(*tr.error_code)) + ")") + "\n" + tr.output;
      result.tool_log.emplace_back(std::move(call), std::move(tr));
      conversation.push_back({Role::User, std::move(msg)});
      continue;
    }
    conversation.push_back({Role::User, kJudgeReminder});
  }
  throw Error(ErrorCode::IterationBudgetExhausted,
              "judge run " + std::to_string(options.run_index) + " gave no verdict within " +
                  std::to_string(options.max_iterations) + " calls");
}

}  // namespace migra
