#include "avtag/tagger.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "avtag/errors.hpp"
#include "avtag/label_parser.hpp"
#include "avtag/scan_ingest.hpp"
#include "avtag/util.hpp"
#include "avtag/vocabulary.hpp"

namespace avtag {

void CorrelationGroups::add_group(std::vector<std::string> engines) {
    const std::size_t id = groups.size();
    for (const auto& engine : engines) {
        if (!membership.emplace(engine, id).second) {
            throw ConfigError("engine \"" + engine + "\" appears in two correlation groups");
        }
    }
    groups.push_back(std::move(engines));
}

std::string CorrelationGroups::vote_key(std::string_view engine) const {
    if (auto it = membership.find(std::string(engine)); it != membership.end()) {
        return "g" + std::to_string(it->second);
    }
    return "e:" + std::string(engine);
}

CorrelationGroups load_correlation_groups(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open correlation file " + path.string());
    CorrelationGroups out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        std::vector<std::string> engines;
        for (auto field : split(line, ',')) {
            std::string engine = to_lower(trim(field));
            if (engine.empty()) throw ConfigError(context + ": empty engine name");
            engines.push_back(std::move(engine));
        }
        try {
            out.add_group(std::move(engines));
        } catch (const ConfigError& e) {
            throw ConfigError(context + ": " + e.what());
        }
    }
    return out;
}

std::string canonical_vuln_spelling(std::string_view token) {
    auto all_digits = [](std::string_view s) {
        if (s.empty()) return false;
        for (char c : s) {
            if (!ascii_digit(c)) return false;
        }
        return true;
    };
    if (token.size() > 3 && token.substr(0, 3) == "cve") {
        std::string_view digits = token.substr(3);
        if (digits.size() >= 7 && digits.size() <= 11 && all_digits(digits)) {
            return "cve_" + std::string(digits.substr(0, 4)) + "_" + std::string(digits.substr(4));
        }
    }
    if (token.size() > 2 && token.substr(0, 2) == "ms") {
        std::string_view digits = token.substr(2);
        if (digits.size() == 5 && all_digits(digits)) {
            return "ms" + std::string(digits.substr(0, 2)) + "_" + std::string(digits.substr(2));
        }
    }
    return std::string(token);
}

TagScores score_tokens(const ScanReport& report, const RuleSet& rules, const Vocabulary& vocabulary,
                       const CategoryAliases& aliases, const CorrelationGroups& groups) {
    std::map<std::pair<LexicalCategory, std::string>, std::set<std::string>> voters;
    for (const auto& detection : report.detections) {
        ParsedLabel parsed;
        try {
            parsed = parse_label(detection.engine, detection.label, rules, vocabulary);
        } catch (const ValidationError&) {
            continue;  // label without tokens casts no votes
        }
        const std::string vote = groups.vote_key(parsed.engine);
        for (std::size_t i = 0; i < parsed.tokens.size(); ++i) {
            LexicalCategory category = parsed.categories[i];
            if (category == LexicalCategory::PRE || category == LexicalCategory::UNK) {
                if (auto known = vocabulary.lookup(parsed.tokens[i])) category = *known;
            }
            if (!is_taggable(category)) continue;
            const std::string& raw = parsed.tokens[i];
            if (vocabulary.is_generic(raw)) continue;
            std::string token =
                category == LexicalCategory::VULN ? canonical_vuln_spelling(raw) : raw;
            token = aliases.canonical(category, token);
            if (vocabulary.is_generic(token)) continue;
            voters[{category, std::move(token)}].insert(vote);
        }
    }
    TagScores scores;
    for (const auto& [key, votes] : voters) {
        scores.emplace(key, static_cast<std::uint32_t>(votes.size()));
    }
    return scores;
}

TagRanking rank_tags(std::string file_id, const TagScores& scores, const Thresholds& thresholds) {
    TagRanking ranking;
    ranking.file_id = std::move(file_id);
    for (const auto& [key, score] : scores) {
        const auto& [category, token] = key;
        if (score >= thresholds.for_category(category)) {
            ranking.tags[category_index(category)].emplace_back(token, score);
        }
    }
    for (auto& list : ranking.tags) {
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
    }
    return ranking;
}

void tag_corpus(ReportReader& reports, const RuleSet& rules, const Vocabulary& vocabulary,
                const CategoryAliases& aliases, const CorrelationGroups& groups,
                const Thresholds& thresholds, const std::function<void(const TagRanking&)>& emit) {
    while (auto report = reports.next()) {
        TagRanking ranking =
            rank_tags(report->file_id, score_tokens(*report, rules, vocabulary, aliases, groups), thresholds);
        ranking.source_chunk = report->source_chunk;
        emit(ranking);
    }
}

std::string tag_record_line(const TagRanking& ranking) {
    nlohmann::ordered_json record;
    record["sha256"] = ranking.file_id;
    for (LexicalCategory category : kTaggableCategories) {
        auto& list = record[category_key(category)] = nlohmann::ordered_json::array();
        for (const auto& [token, score] : ranking.for_category(category)) {
            list.push_back({{"tag", token}, {"score", score}});
        }
    }
    if (ranking.source_chunk) record["chunk"] = *ranking.source_chunk;
    return record.dump();
}

std::optional<TagRanking> parse_tag_line(std::string_view line, std::string& reason) {
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
        reason = "invalid JSON";
        return std::nullopt;
    }
    TagRanking ranking;
    auto sha = record.find("sha256");
    if (sha == record.end() || !sha->is_string()) {
        reason = "missing sha256";
        return std::nullopt;
    }
    ranking.file_id = to_lower(sha->get<std::string>());
    if (!is_lower_hex64(ranking.file_id)) {
        reason = "invalid sha256";
        return std::nullopt;
    }
    if (auto chunk = record.find("chunk"); chunk != record.end()) {
        if (!chunk->is_number_unsigned()) {
            reason = "chunk is not a nonnegative integer";
            return std::nullopt;
        }
        ranking.source_chunk = chunk->get<std::uint32_t>();
    }
    for (LexicalCategory category : kTaggableCategories) {
        auto list = record.find(category_key(category));
        if (list == record.end()) continue;  // reference files may omit categories
        if (!list->is_array()) {
            reason = category_key(category) + " is not an array";
            return std::nullopt;
        }
        for (const auto& entry : *list) {
            if (!entry.is_object() || !entry.contains("tag") || !entry["tag"].is_string()) {
                reason = "tag entry without a \"tag\" string";
                return std::nullopt;
            }
            std::uint32_t score = 0;
            if (auto s = entry.find("score"); s != entry.end()) {
                if (!s->is_number_unsigned()) {
                    reason = "score is not a nonnegative integer";
                    return std::nullopt;
                }
                score = s->get<std::uint32_t>();
            }
            ranking.tags[category_index(category)].emplace_back(entry["tag"].get<std::string>(), score);
        }
    }
    return ranking;
}

}  // namespace avtag
