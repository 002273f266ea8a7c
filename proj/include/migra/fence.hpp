#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

// A fenced block in model output:
//
//   ```tool
//   {"tool": "read_file", "args": {"path": "a.py"}}
//   ```
//
// `info` is the first word after the opening fence; `content` is the exact
// text between the fence lines (each line keeps its '\n').
struct FencedBlock {
  std::string info;
  std::string content;
};

// Scans `text` for fenced blocks (``` or ~~~, three or more).
//
// A block closes on a bare fence line at least as long as its opener. Inner
// fences that carry an info string (```python) open a nested block whose bare
// closer is consumed as content, so a ```playbook block may embed code
// examples. Unterminated blocks are dropped.
std::vector<FencedBlock> extract_fenced_blocks(std::string_view text);

std::optional<std::string> first_block(std::string_view text, std::string_view info);
std::size_t count_blocks(std::string_view text, std::string_view info);

// Wraps `content` in a fence long enough that nothing inside can close it.
std::string make_fence(std::string_view info, std::string_view content);

}  // namespace migra
