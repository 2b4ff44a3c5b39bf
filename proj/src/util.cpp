#include "avtag/util.hpp"

#include "avtag/lexical.hpp"

namespace avtag {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_lower(c);
    return out;
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return s.substr(b, e - b);
}

bool is_lower_hex64(std::string_view s) {
    if (s.size() != 64) return false;
    for (char c : s) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

std::vector<std::string_view> split(std::string_view s, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool is_comment_line(std::string_view line) {
    auto t = trim(line);
    return t.empty() || t.front() == '#';
}

std::optional<LexicalCategory> parse_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        if (name == kCategoryNames[i]) return static_cast<LexicalCategory>(i);
    }
    return std::nullopt;
}

std::string category_key(LexicalCategory c) {
    return to_lower(category_name(c));
}

}  // namespace avtag
