#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "avtag/lexical.hpp"

namespace avtag {

struct ParsedLabel;

/// Corpus-wide token knowledge: per-category observation counts, categories
/// promoted by unanimity, wordlist overrides, and the generic set of tokens
/// excluded from tagging.
///
/// Resolution order: overrides beat promotions; generic tokens are never
/// resolved. Promotion requires exactly one observed category once PRE and
/// UNK are set aside.
class Vocabulary {
  public:
    using CountRow = std::array<std::uint64_t, kCategoryCount>;

    /// Adds one count per (token, category) of the parsed label.
    void observe(const ParsedLabel& parsed);
    void observe(std::string_view token, LexicalCategory category);

    /// Pointwise-adds another vocabulary's counts (sharded accumulation).
    void merge_counts(const Vocabulary& other);

    /// Recomputes promotions from the counts: a token is promoted when its
    /// observed categories, excluding PRE and UNK, name exactly one
    /// category. Overridden and generic tokens are left alone. Idempotent.
    void promote();

    /// Override or promoted category, in that order; nullopt otherwise
    /// (including generic tokens).
    std::optional<LexicalCategory> lookup(std::string_view token) const;

    bool is_generic(std::string_view token) const { return generic_.contains(token); }

    /// Pins a category for a token (wordlist semantics); erases generic.
    void add_override(std::string_view token, LexicalCategory category);

    /// Marks a token generic: excluded from tagging and from resolution.
    void add_generic(std::string_view token);

    /// Loads a wordlist overlay: `token<TAB>CATEGORY` lines, CATEGORY one of
    /// BEH/PLAT/VULN/PACK/FAM/SUF/GEN; `#` comments. GEN rows populate the
    /// generic set; the rest become overrides. Throws ConfigError.
    void load_wordlist(const std::filesystem::path& path);

    /// Writes resolved tokens plus generic tokens (as GEN), sorted by token.
    /// load_wordlist of the result reproduces the same resolution.
    void save_wordlist(const std::filesystem::path& path) const;

    const CountRow* counts_for(std::string_view token) const;
    std::size_t resolved_size() const;
    std::size_t generic_size() const { return generic_.size(); }

  private:
    // Transparent hashing so string_view lookups avoid temporary strings.
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };
    struct Eq {
        using is_transparent = void;
        bool operator()(std::string_view a, std::string_view b) const { return a == b; }
    };
    template <typename V>
    using TokenMap = std::unordered_map<std::string, V, Hash, Eq>;
    using TokenSet = std::unordered_set<std::string, Hash, Eq>;

    TokenMap<CountRow> counts_;
    TokenMap<LexicalCategory> promoted_;
    TokenMap<LexicalCategory> overrides_;
    TokenSet generic_;
};

}  // namespace avtag
