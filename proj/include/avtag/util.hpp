#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace avtag {

inline bool ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool ascii_alnum(char c) { return ascii_alpha(c) || ascii_digit(c); }
inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool is_lower_hex64(std::string_view s);

/// Splits on a single delimiter character; keeps empty fields.
std::vector<std::string_view> split(std::string_view s, char delim);

/// True if the line is blank or starts with '#' after leading whitespace.
bool is_comment_line(std::string_view line);

}  // namespace avtag
