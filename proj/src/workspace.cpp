#include "migra/workspace.hpp"

#include "migra/fs_util.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <regex>
#include <sstream>

namespace migra {

namespace fs = std::filesystem;

Workspace::Workspace(const fs::path& root, std::optional<std::string> build_cmd,
                     std::optional<std::string> test_cmd, int timeout_secs)
    : build_cmd_(std::move(build_cmd)), test_cmd_(std::move(test_cmd)), timeout_secs_(timeout_secs) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::WorkspaceInvalid, "workspace root is not a directory: " + root.string());
  }
  root_ = fs::canonical(root, ec);
  if (ec) throw Error(ErrorCode::WorkspaceInvalid, "cannot resolve workspace root: " + root.string());
  if (timeout_secs_ <= 0) throw Error(ErrorCode::WorkspaceInvalid, "timeout_secs must be positive");
  if (build_cmd_ && build_cmd_->empty()) build_cmd_.reset();
  if (test_cmd_ && test_cmd_->empty()) test_cmd_.reset();
}

fs::path Workspace::absolute(std::string_view relative) const {
  const std::string rel = confine_path(*this, relative);
  return rel == "." ? root_ : root_ / rel;
}

bool Workspace::is_file(std::string_view relative) const noexcept {
  try {
    std::error_code ec;
    return fs::is_regular_file(absolute(relative), ec);
  } catch (const Error&) {
    return false;
  }
}

std::string Workspace::read(std::string_view relative) const {
  const auto path = absolute(relative);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, std::string(relative));
  return read_text_file(path);
}

std::vector<std::string> Workspace::list_files(std::string_view prefix) const {
  const auto base = absolute(prefix);
  std::vector<std::string> out;
  std::error_code ec;
  const auto st = fs::symlink_status(base, ec);
  if (ec || !fs::exists(st)) return out;
  if (fs::is_regular_file(st)) {
    out.push_back(base.lexically_relative(root_).generic_string());
    return out;
  }
  if (!fs::is_directory(st)) return out;
  for (auto it = fs::recursive_directory_iterator(base, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    const auto s = it->symlink_status(ec);
    if (ec) break;
    if (fs::is_regular_file(s)) out.push_back(it->path().lexically_relative(root_).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string confine_path(const Workspace& workspace, std::string_view candidate) {
  if (candidate.empty()) throw Error(ErrorCode::PathInvalid, "empty path");
  if (!is_valid_utf8(candidate) || candidate.find('\0') != std::string_view::npos) {
    throw Error(ErrorCode::PathInvalid, "path is not valid UTF-8 text");
  }
  std::string_view rest = candidate;
  const std::string root = workspace.root().generic_string();
  if (rest.front() == '/') {
    // Absolute: only accepted when it names something under the root.
    if (rest == root) return ".";
    if (rest.size() > root.size() && rest.substr(0, root.size()) == root && rest[root.size()] == '/') {
      rest.remove_prefix(root.size() + 1);
    } else {
      throw Error(ErrorCode::PathEscape, std::string(candidate));
    }
  }

  std::vector<std::string_view> segments;
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto slash = rest.find('/', pos);
    const auto seg = rest.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
    if (seg.empty() || seg == ".") {
      // skip
    } else if (seg == "..") {
      if (segments.empty()) throw Error(ErrorCode::PathEscape, std::string(candidate));
      segments.pop_back();
    } else {
      segments.push_back(seg);
    }
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  if (segments.empty()) return ".";

  std::string rel;
  for (const auto& s : segments) {
    if (!rel.empty()) rel += '/';
    rel += s;
  }

  // Reject symlinked components that lead outside the root.
  std::error_code ec;
  const auto resolved = fs::weakly_canonical(workspace.root() / rel, ec);
  if (!ec) {
    const auto r = resolved.generic_string();
    if (r != root && !(r.size() > root.size() && r.compare(0, root.size(), root) == 0 && r[root.size()] == '/')) {
      throw Error(ErrorCode::PathEscape, std::string(candidate));
    }
  }
  return rel;
}

bool path_under(std::string_view path, std::string_view prefix) noexcept {
  while (!prefix.empty() && prefix.back() == '/') prefix.remove_suffix(1);
  while (prefix.size() >= 2 && prefix.substr(0, 2) == "./") prefix.remove_prefix(2);
  if (prefix.empty() || prefix == ".") return true;
  if (path == prefix) return true;
  return path.size() > prefix.size() && path.substr(0, prefix.size()) == prefix && path[prefix.size()] == '/';
}

std::optional<ToolKind> parse_tool_kind(std::string_view name) noexcept {
  if (name == "list_files") return ToolKind::ListFiles;
  if (name == "read_file") return ToolKind::ReadFile;
  if (name == "write_file") return ToolKind::WriteFile;
  if (name == "grep") return ToolKind::Grep;
  if (name == "search_replace") return ToolKind::SearchReplace;
  if (name == "run_build") return ToolKind::RunBuild;
  if (name == "run_test") return ToolKind::RunTest;
  return std::nullopt;
}

std::string_view to_string(ToolKind kind) noexcept {
  switch (kind) {
    case ToolKind::ListFiles: return "list_files";
    case ToolKind::ReadFile: return "read_file";
    case ToolKind::WriteFile: return "write_file";
    case ToolKind::Grep: return "grep";
    case ToolKind::SearchReplace: return "search_replace";
    case ToolKind::RunBuild: return "run_build";
    case ToolKind::RunTest: return "run_test";
  }
  return "unknown";
}

namespace {

bool is_import_line(std::string_view line) {
  return line.rfind("import ", 0) == 0 || line.rfind("from ", 0) == 0;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// How the path argument relates to the allowed roots.
enum class Access { Inside, Ancestor, Outside };

Access classify(const std::string& rel, const std::vector<std::string>& roots) {
  bool ancestor = false;
  for (const auto& r : roots) {
    if (path_under(rel, r)) return Access::Inside;
    if (path_under(r, rel)) ancestor = true;
  }
  return ancestor ? Access::Ancestor : Access::Outside;
}

// Workspace-relative location of `rel` after resolving symlinks; nullopt
// when it cannot be resolved.
std::optional<std::string> resolved_relative(const Workspace& workspace, const std::string& rel) {
  std::error_code ec;
  const auto root = fs::weakly_canonical(workspace.root(), ec);
  if (ec) return std::nullopt;
  const auto real = fs::weakly_canonical(workspace.root() / rel, ec);
  if (ec) return std::nullopt;
  const auto out = real.lexically_relative(root).generic_string();
  if (out.empty() || out == ".") return std::string(".");
  return out;
}

bool allowed_file(const std::string& rel, const std::optional<std::vector<std::string>>& roots) {
  if (!roots) return true;
  return std::any_of(roots->begin(), roots->end(), [&](const std::string& r) { return path_under(rel, r); });
}

const std::string* find_arg(const ToolCall& call, const char* name) {
  auto it = call.args.find(name);
  return it == call.args.end() ? nullptr : &it->second;
}

}  // namespace

std::vector<std::string> apply_import_rules(const Workspace& workspace, std::string& content) {
  std::vector<std::string> added;
  if (workspace.import_rules().empty()) return added;
  auto lines = split_lines(content);
  const bool trailing_newline = !content.empty() && content.back() == '\n';
  for (const auto& [symbol, import_line] : workspace.import_rules()) {
    if (symbol.empty() || content.find(symbol) == std::string::npos) continue;
    const bool present = std::any_of(lines.begin(), lines.end(), [&](const std::string& l) {
      auto t = l;
      while (!t.empty() && (t.back() == ' ' || t.back() == '\r')) t.pop_back();
      return t == import_line;
    });
    if (present) continue;
    // End of the leading import block: blank and comment lines may be
    // interleaved, the first other line ends it.
    std::size_t insert_at = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& l = lines[i];
      if (is_import_line(l)) {
        insert_at = i + 1;
      } else if (!(l.empty() || l[0] == '#')) {
        break;
      }
    }
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(insert_at), import_line);
    added.push_back(import_line);
  }
  if (!added.empty()) {
    std::string rebuilt;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      rebuilt += lines[i];
      if (i + 1 < lines.size() || trailing_newline || content.empty()) rebuilt += '\n';
    }
    content = std::move(rebuilt);
  }
  return added;
}

ToolResult dispatch_tool(const Workspace& workspace, const ToolCall& call, const DispatchOptions& options) {
  const auto kind = parse_tool_kind(call.tool);
  if (!kind) return ToolResult::failure(ErrorCode::NoSuchTool, "no such tool: " + call.tool);
  if (options.allowed_tools &&
      std::find(options.allowed_tools->begin(), options.allowed_tools->end(), *kind) == options.allowed_tools->end()) {
    return ToolResult::failure(ErrorCode::ToolDenied, "tool not permitted: " + call.tool);
  }

  auto require = [&](const char* name) -> const std::string& {
    const auto* v = find_arg(call, name);
    if (!v) throw Error(ErrorCode::MissingArg, std::string(call.tool) + " requires argument '" + name + "'");
    return *v;
  };

  // Confines a path argument and applies allowed_roots. Ancestors of an
  // allowed root are only acceptable for listing-style tools. Under
  // allowed_roots a path leaving the workspace is reported as denied too.
  auto resolve = [&](const std::string& raw, bool listing) -> std::pair<std::string, Access> {
    std::string rel;
    try {
      rel = confine_path(workspace, raw);
    } catch (const Error& e) {
      if (!options.allowed_roots || e.code() != ErrorCode::PathEscape) throw;
      throw Error(ErrorCode::ToolDenied, "access outside permitted roots: " + raw);
    }
    if (!options.allowed_roots) return {rel, Access::Inside};
    const Access access = classify(rel, *options.allowed_roots);
    if (access == Access::Outside || (access == Access::Ancestor && !listing)) {
      throw Error(ErrorCode::ToolDenied, "access outside permitted roots: " + rel);
    }
    // A symlink under a permitted root may still lead elsewhere in the tree.
    if (const auto real = resolved_relative(workspace, rel); real && *real != rel) {
      const Access real_access = classify(*real, *options.allowed_roots);
      if (real_access == Access::Outside || (real_access == Access::Ancestor && !listing)) {
        throw Error(ErrorCode::ToolDenied, "access outside permitted roots: " + rel + " resolves to " + *real);
      }
    }
    return {rel, access};
  };

  try {
    switch (*kind) {
      case ToolKind::ListFiles: {
        const auto* prefix = find_arg(call, "path");
        const auto [rel, access] = resolve(prefix ? *prefix : ".", true);
        std::string out;
        for (const auto& f : workspace.list_files(rel)) {
          if (!allowed_file(f, options.allowed_roots)) continue;
          out += f;
          out += '\n';
        }
        return ToolResult::success(std::move(out));
      }
      case ToolKind::ReadFile: {
        const auto [rel, access] = resolve(require("path"), false);
        return ToolResult::success(workspace.read(rel));
      }
      case ToolKind::WriteFile: {
        const auto& path_arg = require("path");
        std::string content = require("content");
        const auto [rel, access] = resolve(path_arg, false);
        if (rel == ".") return ToolResult::failure(ErrorCode::PathInvalid, "cannot write the workspace root");
        const auto added = apply_import_rules(workspace, content);
        atomic_write_file(workspace.root() / rel, content);
        std::string out = "wrote " + std::to_string(content.size()) + " bytes to " + rel;
        for (const auto& a : added) out += "\nauto-fixed import: " + a;
        return ToolResult::success(std::move(out));
      }
      case ToolKind::Grep: {
        const auto& pattern = require("pattern");
        const auto* prefix = find_arg(call, "path");
        const auto* regex_flag = find_arg(call, "regex");
        const bool use_regex = regex_flag && (*regex_flag == "true" || *regex_flag == "1");
        if (pattern.empty()) return ToolResult::failure(ErrorCode::MissingArg, "grep requires a non-empty pattern");
        std::optional<std::regex> re;
        if (use_regex) {
          try {
            re.emplace(pattern, std::regex::ECMAScript);
          } catch (const std::regex_error& e) {
            return ToolResult::failure(ErrorCode::InvalidPattern, std::string("invalid regex: ") + e.what());
          }
        }
        const auto [rel, access] = resolve(prefix ? *prefix : ".", true);
        std::string out;
        for (const auto& f : workspace.list_files(rel)) {
          if (!allowed_file(f, options.allowed_roots)) continue;
          const auto lines = split_lines(workspace.read(f));
          for (std::size_t i = 0; i < lines.size(); ++i) {
            const bool hit = re ? std::regex_search(lines[i], *re) : lines[i].find(pattern) != std::string::npos;
            if (hit) out += f + ":" + std::to_string(i + 1) + ":" + lines[i] + "\n";
          }
        }
        return ToolResult::success(std::move(out));
      }
      case ToolKind::SearchReplace: {
        const auto& search = require("search");
        const auto& replace = require("replace");
        if (search.empty()) return ToolResult::failure(ErrorCode::MissingArg, "search_replace requires a non-empty search");
        const auto [rel, access] = resolve(require("path"), false);
        std::string text = workspace.read(rel);
        std::size_t count = 0;
        std::string result;
        std::size_t pos = 0;
        while (true) {
          const auto hit = text.find(search, pos);
          if (hit == std::string::npos) break;
          result.append(text, pos, hit - pos);
          result += replace;
          pos = hit + search.size();
          ++count;
        }
        result.append(text, pos, std::string::npos);
        if (count > 0) atomic_write_file(workspace.root() / rel, result);
        return ToolResult::success("replacements: " + std::to_string(count));
      }
      case ToolKind::RunBuild:
      case ToolKind::RunTest: {
        const auto& cmd = *kind == ToolKind::RunBuild ? workspace.build_cmd() : workspace.test_cmd();
        if (!cmd) {
          return ToolResult::failure(ErrorCode::CommandUnavailable,
                                     std::string(to_string(*kind)) + ": no command configured");
        }
        return run_checked_command(workspace, *cmd, workspace.timeout_secs());
      }
    }
  } catch (const Error& e) {
    return ToolResult::failure(e.code(), e.what());
  }
  return ToolResult::failure(ErrorCode::NoSuchTool, call.tool);
}

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  ~Pipe() {
    for (int f : fd)
      if (f >= 0) ::close(f);
  }
  void close_end(int i) {
    if (fd[i] >= 0) ::close(fd[i]);
    fd[i] = -1;
  }
};

// Splits a stream into lines, tagging each completed line.
struct LineSink {
  std::string partial;
  const char* tag;
  void feed(const char* data, std::size_t n, std::string& out) {
    partial.append(data, n);
    std::size_t start = 0;
    while (true) {
      const auto nl = partial.find('\n', start);
      if (nl == std::string::npos) break;
      out += tag;
      out.append(partial, start, nl - start + 1);
      start = nl + 1;
    }
    partial.erase(0, start);
  }
  void flush(std::string& out) {
    if (partial.empty()) return;
    out += tag;
    out += partial;
    out += '\n';
    partial.clear();
  }
};

}  // namespace

ToolResult run_checked_command(const Workspace& workspace, const std::string& command, int timeout_secs) {
  if (command.empty()) return ToolResult::failure(ErrorCode::SpawnFailure, "empty command");
  Pipe out_pipe, err_pipe;
  if (::pipe2(out_pipe.fd, O_CLOEXEC) != 0 || ::pipe2(err_pipe.fd, O_CLOEXEC) != 0) {
    return ToolResult::failure(ErrorCode::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
  }
  const std::string root = workspace.root().string();
  const pid_t pid = ::fork();
  if (pid < 0) return ToolResult::failure(ErrorCode::SpawnFailure, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(root.c_str()) != 0) ::_exit(126);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_pipe.fd[1], STDOUT_FILENO);
    ::dup2(err_pipe.fd[1], STDERR_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  out_pipe.close_end(1);
  err_pipe.close_end(1);

  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::seconds(timeout_secs);
  std::string output;
  LineSink out_sink{{}, ""}, err_sink{{}, "[stderr] "};
  bool timed_out = false;
  char buf[4096];
  while (out_pipe.fd[0] >= 0 || err_pipe.fd[0] >= 0) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (remaining <= 0) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t n = 0;
    if (out_pipe.fd[0] >= 0) fds[n++] = {out_pipe.fd[0], POLLIN, 0};
    if (err_pipe.fd[0] >= 0) fds[n++] = {err_pipe.fd[0], POLLIN, 0};
    const int rc = ::poll(fds, n, static_cast<int>(std::min<long long>(remaining, 1000)));
    if (rc < 0 && errno != EINTR) break;
    for (nfds_t i = 0; i < n && rc > 0; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const bool is_out = fds[i].fd == out_pipe.fd[0];
      const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        (is_out ? out_sink : err_sink).feed(buf, static_cast<std::size_t>(got), output);
      } else if (got == 0 || (errno != EINTR && errno != EAGAIN)) {
        (is_out ? out_pipe : err_pipe).close_end(0);
      }
    }
  }
  out_sink.flush(output);
  err_sink.flush(output);

  int status = 0;
  if (timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    output += "[timeout] command exceeded " + std::to_string(timeout_secs) + "s and was terminated\n";
    return ToolResult::failure(ErrorCode::Timeout, std::move(output));
  }
  // Output pipes closed; the shell may still be running without them.
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) return ToolResult::failure(ErrorCode::SpawnFailure, std::string("waitpid: ") + std::strerror(errno));
    if (clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      output += "[timeout] command exceeded " + std::to_string(timeout_secs) + "s and was terminated\n";
      return ToolResult::failure(ErrorCode::Timeout, std::move(output));
    }
    ::usleep(10'000);
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return ToolResult::success(std::move(output));
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (code == 127 && output.empty()) {
    return ToolResult::failure(ErrorCode::SpawnFailure, "could not execute /bin/sh");
  }
  output += "[exit status " + std::to_string(code) + "]\n";
  return ToolResult::failure(ErrorCode::CommandFailed, std::move(output));
}

}  // namespace migra
