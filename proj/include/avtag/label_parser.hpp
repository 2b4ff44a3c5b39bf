#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "avtag/lexical.hpp"

namespace avtag {

class Vocabulary;

/// An AV label split into tokens plus its delimiter format.
///
/// Tokens are the maximal alphanumeric runs of the label, lowercased, in
/// order. The format interleaves the literal `TOK` with each delimiter run
/// verbatim, so `Trojan:Win32.Androm.abc` has format `TOK:TOK.TOK.TOK`.
/// Interleaving the format's delimiter runs with the tokens reconstructs the
/// label case-insensitively.
struct TokenizedLabel {
    std::vector<std::string> tokens;
    std::string format;
};

/// Splits a label into lowercase alphanumeric tokens and a delimiter format.
/// Returns nullopt when the label contains no alphanumeric characters.
std::optional<TokenizedLabel> try_tokenize(std::string_view label);

/// As try_tokenize, but throws ValidationError on a tokenless label.
TokenizedLabel tokenize(std::string_view label);

/// One AV label with a lexical category assigned to every token.
struct ParsedLabel {
    std::string engine;
    std::vector<std::string> tokens;
    std::vector<LexicalCategory> categories;
    std::string format;
};

/// One regex arm of a Choice slot. Patterns use search semantics; anchor
/// with ^...$ to require a full-token match.
struct SlotChoice {
    std::regex pattern;
    std::string pattern_text;
    LexicalCategory category;
};

/// Category assignment for one TOK position: either fixed, or the first
/// matching Choice arm with `fallback` when none match.
struct SlotSpec {
    std::vector<SlotChoice> choices;  // empty for a Fixed slot
    LexicalCategory fallback;
};

struct ParseRule {
    std::string engine;
    std::string format;
    std::vector<SlotSpec> slots;
};

/// Rules keyed by (engine, delimiter format).
class RuleSet {
  public:
    /// Adds a rule; throws ConfigError on a duplicate (engine, format) pair
    /// or when the slot count does not match the format's TOK count.
    void add(ParseRule rule);

    const ParseRule* find(std::string_view engine, std::string_view format) const;
    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

  private:
    std::map<std::string, ParseRule, std::less<>> rules_;  // key: engine + '\t' + format
};

/// Counts the TOK slots of a delimiter format string; nullopt when the
/// string is not an alternation of `TOK` and non-alphanumeric runs.
std::optional<std::size_t> format_slot_count(std::string_view format);

/// True for short trailing variant tokens ("abc", "xyz", "ab12", "1234"):
/// length 2..4, or 1-3 letters followed by digits, or purely numeric.
bool is_generic_suffix(std::string_view token);

/// Loads a rule file: `engine <TAB> format <TAB> slot(;slot)*` per line,
/// where slot is `FIXED:<CAT>` or `CHOICE:<regex>-><CAT>|...|DEFAULT:<CAT>`.
/// `#` starts a comment. Throws ConfigError with a line number on syntax
/// errors, bad regexes, duplicate (engine, format) pairs, and SUF assigned
/// to a non-final slot.
RuleSet load_rules(const std::filesystem::path& path);

/// Assigns a lexical category to every token of the label. If the rule set
/// has a rule for (engine, format), its slots decide. Otherwise: the final
/// token becomes SUF when is_generic_suffix holds, tokens in the vocabulary
/// take their vocabulary category, alphabetic tokens of length >= 3 become
/// PRE, everything else UNK.
ParsedLabel parse_label(std::string_view engine, std::string_view label, const RuleSet& rules,
                        const Vocabulary& vocabulary);

}  // namespace avtag
