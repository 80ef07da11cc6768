#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace relrec::detail {

/// Calls `fn(line_number, line)` for each line of `path` (1-based numbers, no trailing
/// newline or carriage return). Gzip input is decompressed transparently.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<std::string_view> split_tabs(std::string_view line);

/// Lines that are blank or start with '#'.
bool skippable(std::string_view line);

/// Strict base-10 parse of the whole field; false on any junk.
bool parse_u64(std::string_view field, std::uint64_t& out);

}  // namespace relrec::detail
