#include "migra/error.hpp"
#include "migra/fs_util.hpp"
#include "migra/workspace.hpp"

#include "../support/test_support.hpp"

#include <gtest/gtest.h>
#include <sys/stat.h>

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

using namespace migra;
using namespace migra::testing;

namespace {

ErrorCode confine_error(const Workspace& ws, std::string_view p) {
  try {
    confine_path(ws, p);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << p;
  return ErrorCode::IoFailure;
}

ToolCall call(std::string tool, std::map<std::string, std::string> args = {}) { return {std::move(tool), std::move(args)}; }

ino_t inode_of(const fs::path& p) {
  struct stat st {};
  ::stat(p.c_str(), &st);
  return st.st_ino;
}

}  // namespace

class WorkspaceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_file(dir / "legacy/a.py", "import tensorflow as tf\nx = 1\ny = tf.constant(x)\n");
    write_file(dir / "legacy/b.py", "print('b')\n");
    write_file(dir / "migrated/a.py", "import jax\n");
    write_file(dir / "notes.txt", "free text\n");
    ws.emplace(dir.path(), "true", "echo tests ok", 5);
  }

  TempDir dir;
  std::optional<Workspace> ws;
};

TEST_F(WorkspaceTest, RootMustBeDirectory) {
  EXPECT_THROW(Workspace(dir / "nope"), Error);
  EXPECT_THROW(Workspace(dir / "notes.txt"), Error);
  EXPECT_THROW(Workspace(dir.path(), std::nullopt, std::nullopt, 0), Error);
}

TEST_F(WorkspaceTest, ConfineNormalizes) {
  EXPECT_EQ(confine_path(*ws, "legacy/a.py"), "legacy/a.py");
  EXPECT_EQ(confine_path(*ws, "./legacy//x/../a.py"), "legacy/a.py");
  EXPECT_EQ(confine_path(*ws, "."), ".");
  EXPECT_EQ(confine_path(*ws, "legacy/.."), ".");
  EXPECT_EQ(confine_path(*ws, ws->root().string() + "/legacy/b.py"), "legacy/b.py");
  EXPECT_EQ(confine_path(*ws, ws->root().string()), ".");
}

TEST_F(WorkspaceTest, ConfineRejects) {
  EXPECT_EQ(confine_error(*ws, ".."), ErrorCode::PathEscape);
  EXPECT_EQ(confine_error(*ws, "legacy/../../x"), ErrorCode::PathEscape);
  EXPECT_EQ(confine_error(*ws, "/etc/passwd"), ErrorCode::PathEscape);
  EXPECT_EQ(confine_error(*ws, ws->root().string() + "x/a.py"), ErrorCode::PathEscape);
  EXPECT_EQ(confine_error(*ws, ""), ErrorCode::PathInvalid);
  EXPECT_EQ(confine_error(*ws, std::string("a\0b", 3)), ErrorCode::PathInvalid);
  EXPECT_EQ(confine_error(*ws, "bad\xff.py"), ErrorCode::PathInvalid);
}

TEST_F(WorkspaceTest, SymlinkOutsideRootIsEscape) {
  TempDir outside;
  write_file(outside / "secret.txt", "s");
  fs::create_directory_symlink(outside.path(), dir / "link");
  EXPECT_EQ(confine_error(*ws, "link/secret.txt"), ErrorCode::PathEscape);
  fs::create_symlink(dir / "notes.txt", dir / "inner_link");
  EXPECT_EQ(confine_path(*ws, "inner_link"), "inner_link");
}

// Random segment soups checked against a simple stack model of the rule.
TEST_F(WorkspaceTest, ConfineFuzzAgainstStackModel) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> segs = {"..", ".", "", "a", "b", "legacy", "x.py"};
  std::uniform_int_distribution<std::size_t> pick(0, segs.size() - 1);
  std::uniform_int_distribution<int> len(1, 8);
  for (int i = 0; i < 2000; ++i) {
    std::string p;
    std::vector<std::string> stack;
    bool escapes = false;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      const auto& s = segs[pick(rng)];
      if (k) p += '/';
      p += s;
      if (s == "..") {
        if (stack.empty()) escapes = true;
        else stack.pop_back();
      } else if (!s.empty() && s != ".") {
        stack.push_back(s);
      }
    }
    if (p.empty()) continue;
    if (p.front() == '/') escapes = true;  // absolute outside the root
    if (escapes) {
      EXPECT_EQ(confine_error(*ws, p), ErrorCode::PathEscape) << p;
      continue;
    }
    std::string expected;
    for (const auto& s : stack) expected += (expected.empty() ? "" : "/") + s;
    if (expected.empty()) expected = ".";
    EXPECT_EQ(confine_path(*ws, p), expected) << p;
  }
}

TEST(PathUnder, SegmentWise) {
  EXPECT_TRUE(path_under("legacy/a.py", "legacy"));
  EXPECT_TRUE(path_under("legacy/a.py", "legacy/"));
  EXPECT_TRUE(path_under("legacy", "legacy"));
  EXPECT_FALSE(path_under("legacy2/a.py", "legacy"));
  EXPECT_TRUE(path_under("anything", ""));
  EXPECT_TRUE(path_under("anything", "."));
}

TEST_F(WorkspaceTest, ListFilesSortedAndPrefixed) {
  EXPECT_EQ(ws->list_files(), (std::vector<std::string>{"legacy/a.py", "legacy/b.py", "migrated/a.py", "notes.txt"}));
  EXPECT_EQ(ws->list_files("legacy"), (std::vector<std::string>{"legacy/a.py", "legacy/b.py"}));
  EXPECT_TRUE(ws->list_files("absent").empty());
  const auto r = dispatch_tool(*ws, call("list_files", {{"path", "migrated"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "migrated/a.py\n");
}

TEST_F(WorkspaceTest, ReadFileAndErrors) {
  auto r = dispatch_tool(*ws, call("read_file", {{"path", "legacy/b.py"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "print('b')\n");
  r = dispatch_tool(*ws, call("read_file", {{"path", "legacy/zz.py"}}));
  EXPECT_EQ(r.error_code, ErrorCode::FileNotFound);
  r = dispatch_tool(*ws, call("read_file"));
  EXPECT_EQ(r.error_code, ErrorCode::MissingArg);
  r = dispatch_tool(*ws, call("read_file", {{"path", "../x"}}));
  EXPECT_EQ(r.error_code, ErrorCode::PathEscape);
  r = dispatch_tool(*ws, call("teleport"));
  EXPECT_EQ(r.error_code, ErrorCode::NoSuchTool);
  EXPECT_FALSE(r.ok);
}

TEST_F(WorkspaceTest, GrepLiteralAndRegex) {
  auto r = dispatch_tool(*ws, call("grep", {{"pattern", "tf.constant"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "legacy/a.py:3:y = tf.constant(x)\n");
  r = dispatch_tool(*ws, call("grep", {{"pattern", "^import (tensorflow|jax)"}, {"regex", "true"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "legacy/a.py:1:import tensorflow as tf\nmigrated/a.py:1:import jax\n");
  r = dispatch_tool(*ws, call("grep", {{"pattern", "import"}, {"path", "migrated"}}));
  EXPECT_EQ(r.output, "migrated/a.py:1:import jax\n");
  r = dispatch_tool(*ws, call("grep", {{"pattern", "("}, {"regex", "true"}}));
  EXPECT_EQ(r.error_code, ErrorCode::InvalidPattern);
  r = dispatch_tool(*ws, call("grep", {{"pattern", "nothing matches this"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "");
}

TEST_F(WorkspaceTest, SearchReplaceCountsAndLeavesUntouchedFiles) {
  const auto before = inode_of(dir / "legacy/b.py");
  auto r = dispatch_tool(*ws, call("search_replace", {{"path", "legacy/b.py"}, {"search", "zzz"}, {"replace", "q"}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "replacements: 0");
  EXPECT_EQ(inode_of(dir / "legacy/b.py"), before);  // no rewrite when nothing matched

  write_file(dir / "rep.py", "aa aa aaa");
  r = dispatch_tool(*ws, call("search_replace", {{"path", "rep.py"}, {"search", "aa"}, {"replace", "b"}}));
  EXPECT_EQ(r.output, "replacements: 3");
  EXPECT_EQ(read_file(dir / "rep.py"), "b b ba");
  r = dispatch_tool(*ws, call("search_replace", {{"path", "rep.py"}, {"search", ""}, {"replace", "b"}}));
  EXPECT_EQ(r.error_code, ErrorCode::MissingArg);
}

TEST_F(WorkspaceTest, WriteFileIsAtomicRename) {
  const auto before = inode_of(dir / "migrated/a.py");
  auto r = dispatch_tool(*ws, call("write_file", {{"path", "migrated/a.py"}, {"content", "import jax.numpy as jnp\n"}}));
  ASSERT_TRUE(r.ok) << r.output;
  EXPECT_NE(inode_of(dir / "migrated/a.py"), before);
  EXPECT_EQ(read_file(dir / "migrated/a.py"), "import jax.numpy as jnp\n");
  r = dispatch_tool(*ws, call("write_file", {{"path", "new/deep/file.py"}, {"content", ""}}));
  ASSERT_TRUE(r.ok);
  EXPECT_TRUE(fs::is_regular_file(dir / "new/deep/file.py"));
  // No temp files left behind.
  for (const auto& f : ws->list_files()) EXPECT_EQ(f.find(".tmp."), std::string::npos) << f;
  r = dispatch_tool(*ws, call("write_file", {{"path", "."}, {"content", "x"}}));
  EXPECT_EQ(r.error_code, ErrorCode::PathInvalid);
}

TEST_F(WorkspaceTest, ConcurrentReaderSeesOldOrNew) {
  const std::string a(64 * 1024, 'a'), b(64 * 1024, 'b');
  const auto path = dir / "big.txt";
  atomic_write_file(path, a);
  std::atomic<bool> stop{false};
  std::atomic<int> torn{0};
  std::thread reader([&] {
    while (!stop) {
      const auto s = read_file(path);
      if (s != a && s != b) ++torn;
    }
  });
  for (int i = 0; i < 200; ++i) atomic_write_file(path, i % 2 ? a : b);
  stop = true;
  reader.join();
  EXPECT_EQ(torn.load(), 0);
}

TEST_F(WorkspaceTest, ImportRulesAppendToImportBlock) {
  ws->set_import_rules({{"jnp.", "import jax.numpy as jnp"}, {"optax.", "import optax"}});
  const std::string content = "# header\nimport jax\n\nx = jnp.zeros(3)\n";
  auto r = dispatch_tool(*ws, call("write_file", {{"path", "m.py"}, {"content", content}}));
  ASSERT_TRUE(r.ok);
  EXPECT_NE(r.output.find("auto-fixed import: import jax.numpy as jnp"), std::string::npos);
  EXPECT_EQ(read_file(dir / "m.py"), "# header\nimport jax\nimport jax.numpy as jnp\n\nx = jnp.zeros(3)\n");

  std::string present = "import jax.numpy as jnp\ny = jnp.ones(1)\n";
  EXPECT_TRUE(apply_import_rules(*ws, present).empty());
  std::string none = "z = 1";
  EXPECT_TRUE(apply_import_rules(*ws, none).empty());
  std::string no_block = "opt = optax.adam(1e-3)";
  EXPECT_EQ(apply_import_rules(*ws, no_block), std::vector<std::string>{"import optax"});
  EXPECT_EQ(no_block, "import optax\nopt = optax.adam(1e-3)");
}

TEST_F(WorkspaceTest, AllowedRootsDenyBeforeAccess) {
  DispatchOptions opts;
  opts.allowed_roots = std::vector<std::string>{"migrated"};
  auto r = dispatch_tool(*ws, call("read_file", {{"path", "legacy/a.py"}}), opts);
  EXPECT_EQ(r.error_code, ErrorCode::ToolDenied);
  r = dispatch_tool(*ws, call("read_file", {{"path", "legacy/absent.py"}}), opts);
  EXPECT_EQ(r.error_code, ErrorCode::ToolDenied);  // denial wins over not-found
  r = dispatch_tool(*ws, call("read_file", {{"path", "../outside.py"}}), opts);
  EXPECT_EQ(r.error_code, ErrorCode::ToolDenied);
  r = dispatch_tool(*ws, call("read_file", {{"path", "../outside.py"}}));
  EXPECT_EQ(r.error_code, ErrorCode::PathEscape);
  r = dispatch_tool(*ws, call("read_file", {{"path", "migrated/a.py"}}), opts);
  EXPECT_TRUE(r.ok);
  r = dispatch_tool(*ws, call("list_files"), opts);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "migrated/a.py\n");
  r = dispatch_tool(*ws, call("list_files", {{"path", "legacy"}}), opts);
  EXPECT_EQ(r.error_code, ErrorCode::ToolDenied);
  r = dispatch_tool(*ws, call("grep", {{"pattern", "import"}}), opts);
  EXPECT_EQ(r.output, "migrated/a.py:1:import jax\n");
}

TEST_F(WorkspaceTest, AllowedRootsFollowSymlinks) {
  fs::create_directory_symlink("../legacy", dir / "migrated/peek");
  DispatchOptions opts;
  opts.allowed_roots = std::vector<std::string>{"migrated"};
  EXPECT_EQ(dispatch_tool(*ws, call("read_file", {{"path", "migrated/peek/a.py"}}), opts).error_code,
            ErrorCode::ToolDenied);
  EXPECT_EQ(dispatch_tool(*ws, call("list_files", {{"path", "migrated/peek"}}), opts).error_code,
            ErrorCode::ToolDenied);
  EXPECT_EQ(dispatch_tool(*ws, call("grep", {{"pattern", "a"}, {"path", "migrated/peek"}}), opts).error_code,
            ErrorCode::ToolDenied);
  EXPECT_TRUE(dispatch_tool(*ws, call("read_file", {{"path", "migrated/a.py"}}), opts).ok);
  // Without roots the link stays usable; it does not leave the workspace.
  EXPECT_TRUE(dispatch_tool(*ws, call("read_file", {{"path", "migrated/peek/a.py"}})).ok);
}

TEST_F(WorkspaceTest, AllowedToolsSubset) {
  DispatchOptions opts;
  opts.allowed_tools = std::vector<ToolKind>{ToolKind::ReadFile};
  EXPECT_TRUE(dispatch_tool(*ws, call("read_file", {{"path", "notes.txt"}}), opts).ok);
  EXPECT_EQ(dispatch_tool(*ws, call("write_file", {{"path", "x"}, {"content", "y"}}), opts).error_code,
            ErrorCode::ToolDenied);
  EXPECT_FALSE(fs::exists(dir / "x"));
}

TEST_F(WorkspaceTest, BuildAndTestCommands) {
  auto r = dispatch_tool(*ws, call("run_build"));
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.output, "");
  r = dispatch_tool(*ws, call("run_test"));
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.output, "tests ok\n");
  Workspace bare(dir.path());
  EXPECT_EQ(dispatch_tool(bare, call("run_build")).error_code, ErrorCode::CommandUnavailable);
}

TEST_F(WorkspaceTest, CommandFailureCapturesStderr) {
  const auto r = run_checked_command(*ws, "echo out; echo oops >&2; exit 1", 5);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.error_code, ErrorCode::CommandFailed);
  EXPECT_NE(r.output.find("out\n"), std::string::npos);
  EXPECT_NE(r.output.find("[stderr] oops\n"), std::string::npos);
  EXPECT_NE(r.output.find("[exit status 1]"), std::string::npos);
}

TEST_F(WorkspaceTest, CommandRunsInWorkspaceRoot) {
  const auto r = run_checked_command(*ws, "cat notes.txt", 5);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.output, "free text\n");
}

TEST_F(WorkspaceTest, TimeoutKillsProcessGroup) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_checked_command(*ws, "sleep 30 & sleep 30", 1);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(r.error_code, ErrorCode::Timeout);
  EXPECT_LT(elapsed, std::chrono::seconds(3));
}
