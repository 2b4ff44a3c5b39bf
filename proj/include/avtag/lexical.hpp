#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace avtag {

/// Lexical category of a token inside an AV label. The first four are the
/// taggable categories that appear in rankings; FAM/SUF/PRE/UNK are parsed
/// but never emitted as tags.
enum class LexicalCategory : std::uint8_t {
    BEH,   ///< malware category or behavior
    PLAT,  ///< OS, file format, or programming language
    VULN,  ///< vulnerability exploited by the malware
    PACK,  ///< packer used to pack the file
    FAM,   ///< malware family
    SUF,   ///< trailing variant/suffix token
    PRE,   ///< ambiguous, but known not to be FAM or SUF
    UNK,   ///< category could not be determined
};

inline constexpr std::size_t kCategoryCount = 8;

/// Categories that may appear in tag rankings, in report order.
inline constexpr std::array<LexicalCategory, 4> kTaggableCategories = {
    LexicalCategory::BEH, LexicalCategory::PLAT,
    LexicalCategory::VULN, LexicalCategory::PACK};

inline constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "BEH", "PLAT", "VULN", "PACK", "FAM", "SUF", "PRE", "UNK"};

constexpr std::string_view category_name(LexicalCategory c) {
    return kCategoryNames[static_cast<std::size_t>(c)];
}

constexpr std::size_t category_index(LexicalCategory c) {
    return static_cast<std::size_t>(c);
}

constexpr bool is_taggable(LexicalCategory c) {
    return c == LexicalCategory::BEH || c == LexicalCategory::PLAT ||
           c == LexicalCategory::VULN || c == LexicalCategory::PACK;
}

/// Parses a category name ("BEH", "PLAT", ...). Returns nullopt for anything
/// else, including the wordlist-only pseudo-category "GEN".
std::optional<LexicalCategory> parse_category(std::string_view name);

/// Lowercase name used in file names and JSON keys ("beh", "plat", ...).
std::string category_key(LexicalCategory c);

}  // namespace avtag
