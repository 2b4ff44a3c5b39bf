#include "avtag/alias_resolver.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>

#include "avtag/errors.hpp"
#include "avtag/util.hpp"

namespace avtag {

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);  // b is the shorter: smaller rows
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
        }
    }
    return row[b.size()];
}

namespace {

bool is_substring(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    return b.find(a) != std::string_view::npos;
}

bool is_anagram(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    std::string x(a), y(b);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    return x == y;
}

}  // namespace

double escore(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) throw ValidationError("escore of an empty token");
    const double base =
        1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(std::min(a.size(), b.size()));
    if (is_substring(a, b) || is_anagram(a, b)) return std::max(base, kSubstringAnagramFloor);
    return base;
}

void TokenStats::add_report(const std::vector<std::string>& tokens) {
    for (const auto& token : tokens) ++tokens_[token];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (std::size_t j = i + 1; j < tokens.size(); ++j) {
            ++pairs_[{tokens[i], tokens[j]}];
        }
    }
}

void TokenStats::add_token_count(std::string_view token, std::uint64_t n) {
    tokens_[std::string(token)] += n;
}

void TokenStats::add_pair_count(std::string_view a, std::string_view b, std::uint64_t n) {
    if (a == b) return;
    if (b < a) std::swap(a, b);
    pairs_[{std::string(a), std::string(b)}] += n;
}

void TokenStats::merge(const TokenStats& other) {
    for (const auto& [token, n] : other.tokens_) tokens_[token] += n;
    for (const auto& [pair, n] : other.pairs_) pairs_[pair] += n;
}

std::uint64_t TokenStats::token_count(std::string_view token) const {
    auto it = tokens_.find(token);
    return it == tokens_.end() ? 0 : it->second;
}

std::uint64_t TokenStats::pair_count(std::string_view a, std::string_view b) const {
    if (a == b) return token_count(a);
    if (b < a) std::swap(a, b);
    auto it = pairs_.find(PairKey(a, b));
    return it == pairs_.end() ? 0 : it->second;
}

double coocur(std::string_view child, std::string_view parent, const TokenStats& stats) {
    const std::uint64_t child_count = stats.token_count(child);
    if (child_count == 0) {
        throw ValidationError("coocur: token \"" + std::string(child) + "\" has no reports");
    }
    return static_cast<double>(stats.pair_count(child, parent)) / static_cast<double>(child_count);
}

namespace {

bool equal_after_strip(std::string_view longer, std::string_view shorter, std::string_view affix) {
    if (longer.size() != shorter.size() + affix.size()) return false;
    if (longer.substr(0, affix.size()) == affix && longer.substr(affix.size()) == shorter) return true;
    return longer.substr(longer.size() - affix.size()) == affix &&
           longer.substr(0, shorter.size()) == shorter;
}

}  // namespace

bool is_trivial_alias(std::string_view a, std::string_view b, const AliasParams& params) {
    if (a == b || a.empty() || b.empty()) return false;
    if (a.size() + 1 == b.size() && b.substr(0, a.size()) == a) return true;
    if (b.size() + 1 == a.size() && a.substr(0, b.size()) == b) return true;
    for (const auto& affix : params.affixes) {
        if (affix.empty()) continue;
        if (equal_after_strip(a, b, affix) || equal_after_strip(b, a, affix)) return true;
    }
    return false;
}

bool is_parent_child(std::string_view child, std::string_view parent, const TokenStats& stats,
                     const AliasParams& params) {
    if (stats.token_count(child) == 0) return false;
    const double e = escore(child, parent);
    if (e < params.escore_min) return false;
    return coocur(child, parent, stats) * e >= params.coocur_escore_min;
}

namespace {

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

  private:
    std::vector<std::size_t> parent_;
};

}  // namespace

AliasMap build_trivial_rewrite(const std::map<std::string, std::uint64_t, std::less<>>& token_counts,
                               const AliasParams& params) {
    std::vector<std::string_view> tokens;
    tokens.reserve(token_counts.size());
    std::map<std::string_view, std::size_t> index;
    for (const auto& [token, count] : token_counts) {
        (void)count;
        index.emplace(token, tokens.size());
        tokens.push_back(token);
    }

    // Candidate pairs come from string surgery on each token, so the work is
    // linear in the vocabulary instead of quadratic: dropping the last
    // character finds trailing-edit pairs, stripping an affix finds the rest.
    UnionFind groups(tokens.size());
    auto unite_with = [&](std::size_t i, std::string_view other) {
        if (other.empty()) return;
        auto it = index.find(other);
        if (it != index.end()) groups.unite(i, it->second);
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string_view t = tokens[i];
        if (t.size() >= 2) unite_with(i, t.substr(0, t.size() - 1));
        for (const auto& affix : params.affixes) {
            if (affix.empty() || affix.size() >= t.size()) continue;
            if (t.substr(0, affix.size()) == affix) unite_with(i, t.substr(affix.size()));
            if (t.substr(t.size() - affix.size()) == affix) unite_with(i, t.substr(0, t.size() - affix.size()));
        }
    }

    // Group representative: highest report count, ties to the smaller token.
    std::vector<std::size_t> rep(tokens.size());
    std::iota(rep.begin(), rep.end(), std::size_t{0});
    auto count_of = [&](std::size_t i) { return token_counts.find(tokens[i])->second; };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::size_t root = groups.find(i);
        std::size_t best = rep[root];
        if (count_of(i) > count_of(best) || (count_of(i) == count_of(best) && tokens[i] < tokens[best])) {
            rep[root] = i;
        }
    }

    AliasMap rewrite;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::size_t best = rep[groups.find(i)];
        if (best != i) rewrite.emplace(tokens[i], tokens[best]);
    }
    return rewrite;
}

CandidateGraph build_candidates(const TokenStats& stats, const AliasParams& params) {
    CandidateGraph graph;
    std::vector<std::pair<std::string_view, std::uint64_t>> order;
    order.reserve(stats.token_counts().size());
    for (const auto& [token, count] : stats.token_counts()) order.emplace_back(token, count);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    graph.tokens_by_freq.reserve(order.size());
    for (const auto& [token, count] : order) {
        (void)count;
        graph.tokens_by_freq.emplace_back(token);
    }

    for (const auto& [pair, n] : stats.pair_counts()) {
        (void)n;
        const auto& [a, b] = pair;
        const std::uint64_t ca = stats.token_count(a);
        const std::uint64_t cb = stats.token_count(b);
        // The less common token is the child; on equal counts the
        // lexicographically smaller token is the parent. Pair keys are
        // sorted, so a < b always.
        std::string_view child = b, parent = a;
        if (ca < cb) {
            child = a;
            parent = b;
        }
        if (is_parent_child(child, parent, stats, params)) {
            graph.children[std::string(parent)].emplace_back(child);
        }
    }
    for (auto& [parent, kids] : graph.children) {
        (void)parent;
        std::sort(kids.begin(), kids.end());
    }
    return graph;
}

AliasMap close_alias_map(const AliasMap& aliases) {
    AliasMap closed;
    for (const auto& [token, canonical] : aliases) {
        if (token == canonical) continue;
        std::set<std::string_view> seen{token};
        std::string_view cur = canonical;
        for (auto it = aliases.find(cur); it != aliases.end(); it = aliases.find(cur)) {
            if (it->second == cur) break;  // self-mapping: terminal
            if (!seen.insert(cur).second) {
                throw ValidationError("alias cycle at \"" + std::string(cur) + "\"");
            }
            cur = it->second;
        }
        if (cur != token) closed[token] = std::string(cur);
    }
    return closed;
}

AliasMap resolve_aliases(const std::vector<std::string>& tokens_by_freq,
                         const std::map<std::string, std::vector<std::string>>& children,
                         const AliasMap& overrides) {
    std::set<std::string, std::less<>> used;
    AliasMap merged;
    for (const auto& root : tokens_by_freq) {
        std::set<std::string, std::less<>> collected;
        std::deque<std::string_view> queue;
        queue.push_back(root);
        while (!queue.empty()) {
            std::string_view t = queue.front();
            queue.pop_front();
            if (used.contains(t) || collected.contains(t)) continue;
            collected.emplace(t);
            if (auto it = children.find(std::string(t)); it != children.end()) {
                for (const auto& child : it->second) queue.push_back(child);
            }
        }
        for (const auto& t : collected) {
            used.insert(t);
            if (t != root) merged[t] = root;
        }
    }

    for (const auto& [token, canonical] : overrides) {
        (void)token;
        merged.erase(canonical);
    }
    for (const auto& [token, canonical] : overrides) {
        if (token != canonical) merged[token] = canonical;
    }
    return close_alias_map(merged);
}

AliasMap load_alias_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open alias file " + path.string());
    AliasMap aliases;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        auto fields = split(line, '\t');
        if (fields.size() != 2) throw ConfigError(context + ": expected token<TAB>canonical");
        std::string token = to_lower(trim(fields[0]));
        std::string canonical = to_lower(trim(fields[1]));
        if (token.empty() || canonical.empty()) throw ConfigError(context + ": empty token");
        if (token == canonical) continue;  // self-mapping: no-op
        if (!aliases.emplace(std::move(token), std::move(canonical)).second) {
            throw ConfigError(context + ": duplicate alias for token");
        }
    }
    AliasMap closed;
    for (const auto& [token, canonical] : aliases) {
        std::set<std::string_view> seen{token};
        std::string_view cur = canonical;
        for (auto it = aliases.find(cur); it != aliases.end(); it = aliases.find(cur)) {
            if (!seen.insert(cur).second) {
                throw ConfigError(path.filename().string() + ": alias cycle at \"" + std::string(cur) + "\"");
            }
            cur = it->second;
        }
        closed[token] = std::string(cur);
    }
    return closed;
}

void save_alias_file(const AliasMap& aliases, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write alias file " + path.string());
    for (const auto& [token, canonical] : aliases) out << token << '\t' << canonical << '\n';
    if (!out.flush()) throw ConfigError("failed writing alias file " + path.string());
}

std::vector<std::string> load_affix_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open affix file " + path.string());
    std::vector<std::string> affixes;
    std::string line;
    while (std::getline(in, line)) {
        if (is_comment_line(line)) continue;
        affixes.push_back(to_lower(trim(line)));
    }
    return affixes;
}

}  // namespace avtag
