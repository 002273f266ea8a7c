#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace migra::testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

fs::path fixture_dir();

// Copies tests/fixtures/<name> into `dest` (created).
void copy_fixture(const std::string& name, const fs::path& dest);

void write_file(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

// Digest over sorted relative paths and file bytes of a tree. Directories
// listed in `skip` (relative names) are left out.
std::string tree_digest(const fs::path& root, const std::vector<std::string>& skip = {});

// Relative path -> file bytes, for tree comparisons that should show the
// differing file on failure.
std::vector<std::pair<std::string, std::string>> tree_contents(const fs::path& root);

// Scripted-transcript JSON helpers.
std::string fenced(std::string_view info, std::string_view body);
std::string tool_block(std::string_view tool, const std::vector<std::pair<std::string, std::string>>& args = {});
std::string tag_script(const std::vector<std::pair<std::string, std::string>>& entries);
std::string sequence_script(const std::vector<std::string>& responses);

// Number of occurrences of `needle` in `hay`.
std::size_t count_occurrences(std::string_view hay, std::string_view needle);

}  // namespace migra::testing
