#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "avtag/lexical.hpp"

namespace avtag {

/// Edit score of 0.75 is the floor when one token is a substring of the
/// other or the two are anagrams.
inline constexpr double kSubstringAnagramFloor = 0.75;

/// Tunables for alias discovery.
struct AliasParams {
    double escore_min = 0.6;          // E: minimum edit score
    double coocur_escore_min = 0.5;   // C: minimum coocur x escore product
    double substring_anagram_floor = kSubstringAnagramFloor;
    std::vector<std::string> affixes;  // strippable leading/trailing substrings
};

/// Classic Levenshtein distance with unit insert/delete/substitute costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - edist/min(len), floored at 0.75 for substrings and anagrams. May be
/// negative when the distance exceeds the shorter length and no floor
/// applies. Throws ValidationError on an empty token.
double escore(std::string_view a, std::string_view b);

/// Report-level co-occurrence counts for one lexical category. |t| counts
/// distinct reports containing the token; |(a,b)| counts reports containing
/// both. Keys are kept sorted so dumps are deterministic.
class TokenStats {
  public:
    using PairKey = std::pair<std::string, std::string>;  // first < second

    explicit TokenStats(LexicalCategory category) : category_(category) {}

    /// Records one report; `tokens` must be this report's distinct tokens of
    /// this category, sorted ascending.
    void add_report(const std::vector<std::string>& tokens);

    void add_token_count(std::string_view token, std::uint64_t n);
    void add_pair_count(std::string_view a, std::string_view b, std::uint64_t n);
    void merge(const TokenStats& other);

    std::uint64_t token_count(std::string_view token) const;
    /// Pair count; |(t,t)| equals |t|.
    std::uint64_t pair_count(std::string_view a, std::string_view b) const;

    LexicalCategory category() const { return category_; }
    const std::map<std::string, std::uint64_t, std::less<>>& token_counts() const { return tokens_; }
    const std::map<PairKey, std::uint64_t>& pair_counts() const { return pairs_; }

  private:
    LexicalCategory category_;
    std::map<std::string, std::uint64_t, std::less<>> tokens_;
    std::map<PairKey, std::uint64_t> pairs_;
};

/// |(child,parent)| / |child|. Throws ValidationError when the child was
/// never observed.
double coocur(std::string_view child, std::string_view parent, const TokenStats& stats);

/// True when the tokens differ by one trailing character, or become equal
/// after stripping one affix off either token's start or end.
bool is_trivial_alias(std::string_view a, std::string_view b, const AliasParams& params);

/// escore >= E and coocur x escore >= C, with `child` the less common token.
bool is_parent_child(std::string_view child, std::string_view parent, const TokenStats& stats,
                     const AliasParams& params);

/// token -> canonical spelling, within one lexical category. Idempotent
/// after closure and acyclic.
using AliasMap = std::map<std::string, std::string, std::less<>>;

/// Groups trivially-aliased tokens (transitively) and maps every token to
/// its group's most frequent spelling, ties to the lexicographically
/// smallest. Group representatives are not mapped.
AliasMap build_trivial_rewrite(const std::map<std::string, std::uint64_t, std::less<>>& token_counts,
                               const AliasParams& params);

/// Parent-child edges drawn from co-occurrence stats, plus the token order
/// that alias resolution consumes.
struct CandidateGraph {
    std::vector<std::string> tokens_by_freq;  // count descending, token ascending
    std::map<std::string, std::vector<std::string>> children;
};

CandidateGraph build_candidates(const TokenStats& stats, const AliasParams& params);

/// Drops self-mappings and follows chains to their ends, so the result maps
/// every token straight to its final canonical name. Throws ValidationError
/// on a cycle.
AliasMap close_alias_map(const AliasMap& aliases);

/// Resolves parent-child aliases: walk tokens most-frequent first, collect
/// each token's not-yet-used descendants breadth-first, and alias them to
/// the current token. Override entries then replace computed ones; a
/// computed mapping of an override's target is dropped so user-pinned
/// canonical names stay canonical. The returned map is chain-closed.
AliasMap resolve_aliases(const std::vector<std::string>& tokens_by_freq,
                         const std::map<std::string, std::vector<std::string>>& children,
                         const AliasMap& overrides);

/// Alias file: `token<TAB>canonical` lines, `#` comments. Self-mappings are
/// dropped; duplicate tokens and cycles are ConfigErrors. Chains are closed:
/// every returned value is a final canonical name.
AliasMap load_alias_file(const std::filesystem::path& path);
void save_alias_file(const AliasMap& aliases, const std::filesystem::path& path);

/// Affix file: one affix per line, `#` comments.
std::vector<std::string> load_affix_file(const std::filesystem::path& path);

}  // namespace avtag
