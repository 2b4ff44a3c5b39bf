#include "avtag/label_parser.hpp"

#include <fstream>

#include "avtag/errors.hpp"
#include "avtag/util.hpp"
#include "avtag/vocabulary.hpp"

namespace avtag {

std::optional<TokenizedLabel> try_tokenize(std::string_view label) {
    TokenizedLabel out;
    std::size_t i = 0;
    while (i < label.size()) {
        if (ascii_alnum(label[i])) {
            std::size_t j = i;
            while (j < label.size() && ascii_alnum(label[j])) ++j;
            std::string token(label.substr(i, j - i));
            for (char& c : token) c = ascii_lower(c);
            out.tokens.push_back(std::move(token));
            out.format += "TOK";
            i = j;
        } else {
            std::size_t j = i;
            while (j < label.size() && !ascii_alnum(label[j])) ++j;
            out.format.append(label.substr(i, j - i));
            i = j;
        }
    }
    if (out.tokens.empty()) return std::nullopt;
    return out;
}

TokenizedLabel tokenize(std::string_view label) {
    auto out = try_tokenize(label);
    if (!out) throw ValidationError("label contains no tokens: \"" + std::string(label) + "\"");
    return std::move(*out);
}

std::optional<std::size_t> format_slot_count(std::string_view format) {
    std::size_t slots = 0;
    std::size_t i = 0;
    while (i < format.size()) {
        if (ascii_alnum(format[i])) {
            if (format.compare(i, 3, "TOK") != 0) return std::nullopt;
            if (i + 3 < format.size() && ascii_alnum(format[i + 3])) return std::nullopt;
            ++slots;
            i += 3;
        } else {
            ++i;
        }
    }
    if (slots == 0) return std::nullopt;
    return slots;
}

bool is_generic_suffix(std::string_view token) {
    if (token.size() < 2) return false;
    if (token.size() <= 4) return true;
    bool numeric = true;
    for (char c : token) numeric = numeric && ascii_digit(c);
    if (numeric) return true;
    std::size_t letters = 0;
    while (letters < token.size() && ascii_alpha(token[letters])) ++letters;
    if (letters < 1 || letters > 3) return false;
    for (std::size_t i = letters; i < token.size(); ++i) {
        if (!ascii_digit(token[i])) return false;
    }
    return true;
}

static bool slot_can_yield(const SlotSpec& slot, LexicalCategory category) {
    if (slot.fallback == category) return true;
    for (const auto& choice : slot.choices) {
        if (choice.category == category) return true;
    }
    return false;
}

void RuleSet::add(ParseRule rule) {
    auto slots = format_slot_count(rule.format);
    if (!slots) throw ConfigError("bad delimiter format: \"" + rule.format + "\"");
    if (*slots != rule.slots.size()) {
        throw ConfigError("rule for (" + rule.engine + ", " + rule.format + ") has " +
                          std::to_string(rule.slots.size()) + " slots, format has " +
                          std::to_string(*slots));
    }
    for (std::size_t i = 0; i + 1 < rule.slots.size(); ++i) {
        if (slot_can_yield(rule.slots[i], LexicalCategory::SUF)) {
            throw ConfigError("SUF is only allowed in the final slot");
        }
    }
    std::string key = rule.engine + '\t' + rule.format;
    auto [it, inserted] = rules_.emplace(std::move(key), std::move(rule));
    if (!inserted) {
        throw ConfigError("duplicate rule for (" + it->second.engine + ", " + it->second.format + ")");
    }
}

const ParseRule* RuleSet::find(std::string_view engine, std::string_view format) const {
    std::string key;
    key.reserve(engine.size() + 1 + format.size());
    key.append(engine);
    key.push_back('\t');
    key.append(format);
    auto it = rules_.find(key);
    return it == rules_.end() ? nullptr : &it->second;
}

namespace {

LexicalCategory parse_category_or_throw(std::string_view name, const std::string& context) {
    auto cat = parse_category(name);
    if (!cat) throw ConfigError(context + ": unknown category \"" + std::string(name) + "\"");
    return *cat;
}

/// Parses `CHOICE:<regex>-><CAT>|...|DEFAULT:<CAT>`. Arms are split on '|',
/// then pieces are re-joined until one ends in -><CAT>, so regexes may
/// contain alternation.
SlotSpec parse_choice_slot(std::string_view body, const std::string& context) {
    SlotSpec slot;
    bool have_default = false;
    auto pieces = split(body, '|');
    std::string pending;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (!pending.empty()) pending.push_back('|');
        pending.append(pieces[i]);
        if (pending.rfind("DEFAULT:", 0) == 0 && pending.find("->") == std::string::npos) {
            if (i + 1 != pieces.size()) throw ConfigError(context + ": DEFAULT must be the last arm");
            slot.fallback = parse_category_or_throw(pending.substr(8), context);
            have_default = true;
            pending.clear();
            break;
        }
        auto arrow = pending.rfind("->");
        if (arrow == std::string::npos) continue;  // '|' belonged to the regex
        auto cat = parse_category(std::string_view(pending).substr(arrow + 2));
        if (!cat) continue;  // "->" belonged to the regex; keep accumulating
        SlotChoice choice;
        choice.pattern_text = pending.substr(0, arrow);
        choice.category = *cat;
        if (choice.pattern_text.empty()) throw ConfigError(context + ": empty regex");
        try {
            choice.pattern.assign(choice.pattern_text, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw ConfigError(context + ": bad regex \"" + choice.pattern_text + "\": " + e.what());
        }
        slot.choices.push_back(std::move(choice));
        pending.clear();
    }
    if (!pending.empty()) throw ConfigError(context + ": malformed arm \"" + pending + "\"");
    if (!have_default) throw ConfigError(context + ": CHOICE slot is missing DEFAULT");
    if (slot.choices.empty()) throw ConfigError(context + ": CHOICE slot has no regex arm");
    return slot;
}

SlotSpec parse_slot(std::string_view text, const std::string& context) {
    if (text.rfind("FIXED:", 0) == 0) {
        SlotSpec slot;
        slot.fallback = parse_category_or_throw(text.substr(6), context);
        return slot;
    }
    if (text.rfind("CHOICE:", 0) == 0) return parse_choice_slot(text.substr(7), context);
    throw ConfigError(context + ": slot must start with FIXED: or CHOICE:");
}

}  // namespace

RuleSet load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rule file " + path.string());
    RuleSet rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        auto fields = split(line, '\t');
        if (fields.size() != 3) throw ConfigError(context + ": expected engine<TAB>format<TAB>slots");
        ParseRule rule;
        rule.engine = to_lower(trim(fields[0]));
        rule.format = std::string(trim(fields[1]));
        if (rule.engine.empty()) throw ConfigError(context + ": empty engine name");
        auto slot_texts = split(trim(fields[2]), ';');
        for (auto text : slot_texts) rule.slots.push_back(parse_slot(trim(text), context));
        try {
            rules.add(std::move(rule));
        } catch (const ConfigError& e) {
            throw ConfigError(context + ": " + e.what());
        }
    }
    return rules;
}

ParsedLabel parse_label(std::string_view engine, std::string_view label, const RuleSet& rules,
                        const Vocabulary& vocabulary) {
    TokenizedLabel tokenized = tokenize(label);
    ParsedLabel out;
    out.engine = to_lower(trim(engine));
    out.tokens = std::move(tokenized.tokens);
    out.format = std::move(tokenized.format);
    out.categories.reserve(out.tokens.size());

    if (const ParseRule* rule = rules.find(out.engine, out.format)) {
        for (std::size_t i = 0; i < out.tokens.size(); ++i) {
            const SlotSpec& slot = rule->slots[i];
            LexicalCategory category = slot.fallback;
            for (const auto& choice : slot.choices) {
                if (std::regex_search(out.tokens[i], choice.pattern)) {
                    category = choice.category;
                    break;
                }
            }
            out.categories.push_back(category);
        }
        return out;
    }

    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
        const std::string& token = out.tokens[i];
        if (i + 1 == out.tokens.size() && is_generic_suffix(token)) {
            out.categories.push_back(LexicalCategory::SUF);
            continue;
        }
        if (auto known = vocabulary.lookup(token)) {
            out.categories.push_back(*known);
            continue;
        }
        bool alpha = true;
        for (char c : token) alpha = alpha && ascii_alpha(c);
        out.categories.push_back(alpha && token.size() >= 3 ? LexicalCategory::PRE : LexicalCategory::UNK);
    }
    return out;
}

}  // namespace avtag
