#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uncproxy::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Splits on '\n', strips a trailing '\r' from every line and drops a final empty line.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

// Shortest decimal representation that round-trips.
std::string format_double(double v);

double parse_double(std::string_view field, std::size_t line_no);
long long parse_int(std::string_view field, std::size_t line_no);

}  // namespace uncproxy::io
