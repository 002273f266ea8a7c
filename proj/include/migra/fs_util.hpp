#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace migra {

// Reads a whole file. Throws Error{FileNotFound} / Error{IoFailure}.
std::string read_text_file(const std::filesystem::path& path);

// Writes `content` to a sibling temp file, flushes it, then renames it over
// `path`. Parent directories are created. Readers observe either the old or
// the new content, never a partial file. Throws Error{IoFailure}.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// True when `text` is well-formed UTF-8.
bool is_valid_utf8(std::string_view text) noexcept;

// Number of lines in `text`; a final line without '\n' still counts.
std::size_t count_lines(std::string_view text) noexcept;

}  // namespace migra
