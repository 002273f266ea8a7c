#pragma once

#include "migra/error.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace migra {

// The directory tree agents operate on. Every path handed to a tool is
// confined to `root` after normalization; there is no other way for an agent
// to touch disk or run commands.
class Workspace {
 public:
  // Throws Error{WorkspaceInvalid} unless `root` is an existing directory.
  explicit Workspace(const std::filesystem::path& root,
                     std::optional<std::string> build_cmd = std::nullopt,
                     std::optional<std::string> test_cmd = std::nullopt,
                     int timeout_secs = 120);

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::optional<std::string>& build_cmd() const noexcept { return build_cmd_; }
  const std::optional<std::string>& test_cmd() const noexcept { return test_cmd_; }
  int timeout_secs() const noexcept { return timeout_secs_; }

  // (symbol prefix, import line) pairs applied after every write_file: when
  // the written text uses the prefix but lacks the import, the import line is
  // appended to the leading import block.
  void set_import_rules(std::vector<std::pair<std::string, std::string>> rules) {
    import_rules_ = std::move(rules);
  }
  const std::vector<std::pair<std::string, std::string>>& import_rules() const noexcept {
    return import_rules_;
  }

  std::filesystem::path absolute(std::string_view relative) const;
  bool is_file(std::string_view relative) const noexcept;
  std::string read(std::string_view relative) const;

  // Sorted workspace-relative paths of regular files under `prefix`
  // ("." = whole tree). Symlinks are not followed.
  std::vector<std::string> list_files(std::string_view prefix = ".") const;

 private:
  std::filesystem::path root_;
  std::optional<std::string> build_cmd_;
  std::optional<std::string> test_cmd_;
  int timeout_secs_;
  std::vector<std::pair<std::string, std::string>> import_rules_;
};

// Normalizes `candidate` ("." and ".." segments, repeated separators) and
// returns the workspace-relative path, "." for the root itself. Absolute
// candidates are accepted only when they lie under the root. Symlinked
// components that resolve outside the root are rejected.
// Throws Error{PathEscape} or Error{PathInvalid}.
std::string confine_path(const Workspace& workspace, std::string_view candidate);

// True when `path` equals `prefix` or lies beneath it, compared by whole
// path segments. "" and "." match everything.
bool path_under(std::string_view path, std::string_view prefix) noexcept;

enum class ToolKind { ListFiles, ReadFile, WriteFile, Grep, SearchReplace, RunBuild, RunTest };

std::optional<ToolKind> parse_tool_kind(std::string_view name) noexcept;
std::string_view to_string(ToolKind kind) noexcept;

struct ToolCall {
  std::string tool;
  std::map<std::string, std::string> args;
};

// ok xor error_code.
struct ToolResult {
  bool ok = true;
  std::string output;
  std::optional<ErrorCode> error_code;

  static ToolResult success(std::string output) { return {true, std::move(output), std::nullopt}; }
  static ToolResult failure(ErrorCode code, std::string output) { return {false, std::move(output), code}; }
};

struct DispatchOptions {
  // When set, every path-touching call outside these prefixes, including
  // one escaping the workspace, is denied before any filesystem access.
  std::optional<std::vector<std::string>> allowed_roots;
  // When set, tools outside this subset are denied.
  std::optional<std::vector<ToolKind>> allowed_tools;
};

// Executes one tool call. Failures come back as ToolResult error codes
// (ToolDenied, PathEscape, PathInvalid, FileNotFound, NoSuchTool, MissingArg,
// InvalidPattern, CommandUnavailable, CommandFailed, Timeout, SpawnFailure);
// nothing is thrown for agent mistakes.
ToolResult dispatch_tool(const Workspace& workspace, const ToolCall& call, const DispatchOptions& options = {});

// Runs `command` through /bin/sh with the workspace root as working
// directory. stdout and stderr are captured interleaved by line; stderr lines
// are prefixed with "[stderr] ". On timeout the whole process group is killed.
ToolResult run_checked_command(const Workspace& workspace, const std::string& command, int timeout_secs);

// Applies the workspace import rules to `content`; returns the added lines.
std::vector<std::string> apply_import_rules(const Workspace& workspace, std::string& content);

}  // namespace migra
