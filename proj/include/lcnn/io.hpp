#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lcnn::io {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
/// Strict parse of a whole field; throws ValidationError on junk.
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);

/// Writes to "<path>.tmp" and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for manifest config hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace lcnn::io
