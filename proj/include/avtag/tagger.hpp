#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "avtag/alias_resolver.hpp"
#include "avtag/lexical.hpp"
#include "avtag/scan_report.hpp"

namespace avtag {

class RuleSet;
class Vocabulary;
class ReportReader;

/// Disjoint sets of AV engines known to share detection technology. Engines
/// outside every group are implicit singletons.
struct CorrelationGroups {
    std::vector<std::vector<std::string>> groups;
    std::unordered_map<std::string, std::size_t> membership;

    /// Adds a group; throws ConfigError when an engine is already grouped.
    void add_group(std::vector<std::string> engines);

    /// Identity of the vote an engine casts: engines in one group share one
    /// key, ungrouped engines vote as themselves.
    std::string vote_key(std::string_view engine) const;
};

/// Correlation file: one group per line, engines comma-separated, `#`
/// comments. An engine in two groups is a ConfigError.
CorrelationGroups load_correlation_groups(const std::filesystem::path& path);

/// Minimum vote count per taggable category, indexed in category order.
struct Thresholds {
    std::array<std::uint32_t, 4> min_votes{5, 5, 1, 1};  // BEH, PLAT, VULN, PACK

    std::uint32_t for_category(LexicalCategory c) const { return min_votes[category_index(c)]; }
    void set(LexicalCategory c, std::uint32_t t) { min_votes[category_index(c)] = t; }
};

/// Alias maps for the four taggable categories.
struct CategoryAliases {
    std::array<AliasMap, 4> by_category;

    const AliasMap& for_category(LexicalCategory c) const { return by_category[category_index(c)]; }
    AliasMap& for_category(LexicalCategory c) { return by_category[category_index(c)]; }

    std::string canonical(LexicalCategory c, std::string_view token) const {
        const AliasMap& m = for_category(c);
        auto it = m.find(token);
        return it == m.end() ? std::string(token) : it->second;
    }
};

/// Normalizes concatenated vulnerability identifiers to their conventional
/// underscored spelling: "cve20170144" -> "cve_2017_0144", "ms08067" ->
/// "ms08_067". Other tokens pass through unchanged.
std::string canonical_vuln_spelling(std::string_view token);

/// Vote counts per (category, canonical token).
using TagScores = std::map<std::pair<LexicalCategory, std::string>, std::uint32_t>;

/// Parses every label of the report and counts, for each surviving
/// (category, token), the distinct correlation groups that emitted it.
/// PRE and UNK tokens are first re-categorized through the vocabulary;
/// FAM/SUF/PRE/UNK and generic tokens are dropped; VULN spellings are
/// normalized; aliases are replaced by their canonical names.
TagScores score_tokens(const ScanReport& report, const RuleSet& rules, const Vocabulary& vocabulary,
                       const CategoryAliases& aliases, const CorrelationGroups& groups);

/// Ranked tags of one file: per category, (token, score) sorted by score
/// descending then token ascending, scores >= the category threshold.
struct TagRanking {
    std::string file_id;
    std::optional<std::uint32_t> source_chunk;  // carried through for temporal splits
    std::array<std::vector<std::pair<std::string, std::uint32_t>>, 4> tags;  // BEH, PLAT, VULN, PACK

    const std::vector<std::pair<std::string, std::uint32_t>>& for_category(LexicalCategory c) const {
        return tags[category_index(c)];
    }
};

TagRanking rank_tags(std::string file_id, const TagScores& scores, const Thresholds& thresholds);

/// Tags every report in the stream, preserving input order.
void tag_corpus(ReportReader& reports, const RuleSet& rules, const Vocabulary& vocabulary,
                const CategoryAliases& aliases, const CorrelationGroups& groups,
                const Thresholds& thresholds, const std::function<void(const TagRanking&)>& emit);

/// One tag-output record: {"sha256":..., "beh":[{"tag":...,"score":n},...],
/// "plat":[...], "vuln":[...], "pack":[...]} plus "chunk" when known. The
/// four category keys are always present. No trailing newline.
std::string tag_record_line(const TagRanking& ranking);

/// Parses a tag-output record; scores and chunk are optional on input.
/// Returns nullopt and fills `reason` when malformed.
std::optional<TagRanking> parse_tag_line(std::string_view line, std::string& reason);

}  // namespace avtag
