#include "migra/fence.hpp"

#include <algorithm>

namespace migra {
namespace {

struct FenceLine {
  char ch = 0;
  std::size_t len = 0;
  std::string info;  // empty for a bare fence
};

std::optional<FenceLine> parse_fence_line(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || (line[i] != '`' && line[i] != '~')) return std::nullopt;
  FenceLine f;
  f.ch = line[i];
  while (i < line.size() && line[i] == f.ch) {
    ++f.len;
    ++i;
  }
  if (f.len < 3) return std::nullopt;
  std::string_view rest = line.substr(i);
  while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
  while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t' || rest.back() == '\r' || rest.back() == '\n')) {
    rest.remove_suffix(1);
  }
  const auto word_end = rest.find_first_of(" \t");
  f.info = std::string(rest.substr(0, word_end));
  if (f.ch == '`' && f.info.find('`') != std::string::npos) return std::nullopt;
  return f;
}

}  // namespace

std::vector<FencedBlock> extract_fenced_blocks(std::string_view text) {
  std::vector<FencedBlock> blocks;
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start + 1));
    start = nl + 1;
  }

  std::size_t i = 0;
  while (i < lines.size()) {
    auto open = parse_fence_line(lines[i]);
    if (!open || open->info.empty()) {
      ++i;
      continue;
    }
    std::string content;
    int depth = 0;
    bool closed = false;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      auto f = parse_fence_line(lines[j]);
      if (f && f->ch == open->ch) {
        if (!f->info.empty()) {
          ++depth;
        } else if (depth > 0) {
          --depth;
        } else if (f->len >= open->len) {
          closed = true;
          break;
        }
      }
      content.append(lines[j]);
    }
    if (!closed) break;
    blocks.push_back({open->info, std::move(content)});
    i = j + 1;
  }
  return blocks;
}

std::optional<std::string> first_block(std::string_view text, std::string_view info) {
  for (auto& b : extract_fenced_blocks(text)) {
    if (b.info == info) return std::move(b.content);
  }
  return std::nullopt;
}

std::size_t count_blocks(std::string_view text, std::string_view info) {
  const auto blocks = extract_fenced_blocks(text);
  return static_cast<std::size_t>(
      std::count_if(blocks.begin(), blocks.end(), [&](const FencedBlock& b) { return b.info == info; }));
}

std::string make_fence(std::string_view info, std::string_view content) {
  std::size_t longest = 0, run = 0;
  for (char c : content) {
    run = (c == '`') ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  const std::string fence(std::max<std::size_t>(3, longest + 1), '`');
  std::string out = fence + std::string(info) + "\n" + std::string(content);
  if (!content.empty() && content.back() != '\n') out += '\n';
  out += fence + "\n";
  return out;
}

}  // namespace migra
