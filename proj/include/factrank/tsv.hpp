#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace factrank::tsv {

std::vector<std::string> split(std::string_view line, char sep = '\t');

/// Reads a UTF-8, LF-terminated text file line by line. A trailing CR is
/// dropped. The callback receives the 1-based line number.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::string_view trim(std::string_view s);

/// Writes `content` atomically enough for our purposes: a sibling temp file
/// renamed over the target.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace factrank::tsv
