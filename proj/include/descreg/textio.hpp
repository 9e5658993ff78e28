#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace descreg::textio {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double value);

/// Fixed-point text with the given number of decimals.
std::string format_fixed(double value, int decimals);

/// Parses a full token as a base-10 real; nullopt on any trailing garbage.
std::optional<double> parse_real(std::string_view token);

std::optional<long long> parse_integer(std::string_view token);

/// Splits on runs of spaces; empty tokens are dropped.
std::vector<std::string_view> split_spaces(std::string_view line);

/// Splits on single tab characters; empty fields are kept.
std::vector<std::string_view> split_tabs(std::string_view line);

std::string_view trim(std::string_view text);

/// Reads a stream into lines, stripping a trailing '\r' from each.
std::vector<std::string> read_lines(std::istream& in);

std::vector<std::string> read_file_lines(const std::string& path);

std::string read_file(const std::string& path);

void write_file(const std::string& path, std::string_view contents);

}  // namespace descreg::textio
