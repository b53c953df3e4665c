#pragma once

// Small string helpers shared by the line-oriented file readers.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace darkscan::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view s);
std::optional<uint64_t> parse_u64(std::string_view s);
std::optional<double> parse_double(std::string_view s);
std::string to_lower(std::string_view s);

/// Whole file contents; throws Error(IoError) naming the path.
std::string read_file(const std::string& path);

} // namespace darkscan::text
