#include "avtag/vocabulary.hpp"

#include <fstream>
#include <map>

#include "avtag/errors.hpp"
#include "avtag/label_parser.hpp"
#include "avtag/util.hpp"

namespace avtag {

void Vocabulary::observe(const ParsedLabel& parsed) {
    for (std::size_t i = 0; i < parsed.tokens.size(); ++i) {
        observe(parsed.tokens[i], parsed.categories[i]);
    }
}

void Vocabulary::observe(std::string_view token, LexicalCategory category) {
    auto it = counts_.find(token);
    if (it == counts_.end()) it = counts_.emplace(std::string(token), CountRow{}).first;
    ++it->second[category_index(category)];
}

void Vocabulary::merge_counts(const Vocabulary& other) {
    for (const auto& [token, row] : other.counts_) {
        auto it = counts_.find(token);
        if (it == counts_.end()) {
            counts_.emplace(token, row);
            continue;
        }
        for (std::size_t i = 0; i < kCategoryCount; ++i) it->second[i] += row[i];
    }
}

void Vocabulary::promote() {
    promoted_.clear();
    for (const auto& [token, row] : counts_) {
        if (overrides_.contains(token) || generic_.contains(token)) continue;
        LexicalCategory sole{};
        int observed = 0;
        for (LexicalCategory category :
             {LexicalCategory::BEH, LexicalCategory::PLAT, LexicalCategory::VULN,
              LexicalCategory::PACK, LexicalCategory::FAM, LexicalCategory::SUF}) {
            if (row[category_index(category)] > 0) {
                sole = category;
                ++observed;
            }
        }
        if (observed == 1) promoted_.emplace(token, sole);
    }
}

std::optional<LexicalCategory> Vocabulary::lookup(std::string_view token) const {
    if (auto it = overrides_.find(token); it != overrides_.end()) return it->second;
    if (auto it = promoted_.find(token); it != promoted_.end()) return it->second;
    return std::nullopt;
}

void Vocabulary::add_override(std::string_view token, LexicalCategory category) {
    if (category == LexicalCategory::PRE || category == LexicalCategory::UNK) {
        throw ConfigError("token \"" + std::string(token) + "\" cannot be pinned to " +
                          std::string(category_name(category)));
    }
    generic_.erase(std::string(token));
    overrides_.insert_or_assign(std::string(token), category);
    promoted_.erase(std::string(token));
}

void Vocabulary::add_generic(std::string_view token) {
    overrides_.erase(std::string(token));
    promoted_.erase(std::string(token));
    generic_.insert(std::string(token));
}

void Vocabulary::load_wordlist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open wordlist " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        auto fields = split(line, '\t');
        if (fields.size() != 2) throw ConfigError(context + ": expected token<TAB>CATEGORY");
        std::string token = to_lower(trim(fields[0]));
        auto name = trim(fields[1]);
        if (token.empty()) throw ConfigError(context + ": empty token");
        if (name == "GEN") {
            add_generic(token);
            continue;
        }
        auto category = parse_category(name);
        if (!category || *category == LexicalCategory::PRE || *category == LexicalCategory::UNK) {
            throw ConfigError(context + ": unknown category \"" + std::string(name) + "\"");
        }
        add_override(token, *category);
    }
}

void Vocabulary::save_wordlist(const std::filesystem::path& path) const {
    std::map<std::string, std::string, std::less<>> rows;
    for (const auto& [token, category] : promoted_) rows[token] = category_name(category);
    for (const auto& [token, category] : overrides_) rows[token] = category_name(category);
    for (const auto& token : generic_) rows[token] = "GEN";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write wordlist " + path.string());
    for (const auto& [token, name] : rows) out << token << '\t' << name << '\n';
    if (!out.flush()) throw ConfigError("failed writing wordlist " + path.string());
}

const Vocabulary::CountRow* Vocabulary::counts_for(std::string_view token) const {
    auto it = counts_.find(token);
    return it == counts_.end() ? nullptr : &it->second;
}

std::size_t Vocabulary::resolved_size() const {
    // add_override erases any promotion and promote() skips overridden
    // tokens, so the two maps are disjoint.
    return promoted_.size() + overrides_.size();
}

}  // namespace avtag
