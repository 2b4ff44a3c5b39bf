#include "avtag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "avtag/errors.hpp"
#include "avtag/label_parser.hpp"
#include "avtag/scan_ingest.hpp"
#include "avtag/util.hpp"
#include "avtag/vocabulary.hpp"

namespace avtag {
namespace {

namespace fs = std::filesystem;

constexpr std::size_t kBatchLines = 256;

struct LineBatch {
    std::uint64_t seq = 0;
    std::vector<std::pair<std::string, std::uint64_t>> lines;  // text, 1-based line number
};

/// Bounded queue of line batches. close() lets consumers drain what is left.
class BatchQueue {
  public:
    explicit BatchQueue(std::size_t capacity) : capacity_(capacity) {}

    void push(LineBatch&& batch) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_; });
        items_.push_back(std::move(batch));
        not_empty_.notify_one();
    }

    bool pop(LineBatch& out) {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return false;
        out = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return true;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
    }

  private:
    std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<LineBatch> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

/// Restores input order: batch payloads are written to the stream strictly
/// by sequence number. The thread holding the next expected sequence is
/// never blocked, so draining always makes progress.
class OrderedSink {
  public:
    OrderedSink(std::ostream* out, std::size_t max_pending) : out_(out), max_pending_(max_pending) {}

    void submit(std::uint64_t seq, std::string&& bytes) {
        std::unique_lock lock(mu_);
        ready_.wait(lock, [&] { return pending_.size() < max_pending_ || seq == next_; });
        pending_.emplace(seq, std::move(bytes));
        auto it = pending_.find(next_);
        while (it != pending_.end()) {
            out_->write(it->second.data(), static_cast<std::streamsize>(it->second.size()));
            pending_.erase(it);
            it = pending_.find(++next_);
        }
        ready_.notify_all();
    }

  private:
    std::ostream* out_;
    std::mutex mu_;
    std::condition_variable ready_;
    std::map<std::uint64_t, std::string> pending_;
    std::size_t max_pending_;
    std::uint64_t next_ = 0;
};

SweepTotals run_serial_sweep(const fs::path& reports, bool strict,
                             const std::function<void(const ScanReport&, unsigned)>& fold,
                             const std::function<void(const ScanReport&, std::string&)>& emit,
                             std::ostream* sink) {
    ReportReader reader(reports, strict);
    SweepTotals totals;
    std::string bytes;
    while (auto report = reader.next()) {
        ++totals.reports;
        if (fold) fold(*report, 0);
        if (emit) {
            bytes.clear();
            emit(*report, bytes);
            sink->write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
    }
    totals.skipped = reader.records_skipped();
    return totals;
}

SweepTotals run_sweep(const fs::path& reports, bool strict, unsigned threads,
                      const std::function<void(const ScanReport&, unsigned)>& fold,
                      const std::function<void(const ScanReport&, std::string&)>& emit,
                      std::ostream* sink) {
    if (threads <= 1) return run_serial_sweep(reports, strict, fold, emit, sink);

    ReportReader reader(reports, /*strict=*/false, nullptr);
    BatchQueue queue(threads * 4);
    OrderedSink ordered(sink, threads * 4);

    std::atomic<bool> failed{false};
    std::mutex error_mu;
    std::uint64_t error_line = 0;
    std::string error_reason;
    std::exception_ptr worker_exception;
    auto record_error = [&](std::uint64_t line, const std::string& reason) {
        std::lock_guard lock(error_mu);
        if (error_reason.empty() || line < error_line) {
            error_line = line;
            error_reason = reason;
        }
        failed.store(true, std::memory_order_relaxed);
    };

    std::vector<std::vector<std::pair<std::uint64_t, std::string>>> diagnostics(threads);
    std::vector<std::uint64_t> shard_reports(threads, 0);

    auto worker = [&](unsigned shard) {
        LineBatch batch;
        std::string record;
        while (queue.pop(batch)) {
            std::string bytes;
            if (!failed.load(std::memory_order_relaxed)) {
                try {
                    for (const auto& [text, lineno] : batch.lines) {
                        std::string reason;
                        auto report = parse_report_line(text, reason);
                        if (!report) {
                            if (strict) {
                                record_error(lineno, reason);
                                break;
                            }
                            diagnostics[shard].emplace_back(lineno, reason);
                            continue;
                        }
                        ++shard_reports[shard];
                        if (fold) fold(*report, shard);
                        if (emit) {
                            record.clear();
                            emit(*report, record);
                            bytes += record;
                        }
                    }
                } catch (...) {
                    {
                        std::lock_guard lock(error_mu);
                        if (!worker_exception) worker_exception = std::current_exception();
                    }
                    failed.store(true, std::memory_order_relaxed);
                }
            }
            // Every popped batch is submitted, even when empty, so the
            // ordered stream has no holes and nobody deadlocks.
            if (sink) ordered.submit(batch.seq, std::move(bytes));
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker, i);

    std::uint64_t seq = 0;
    LineBatch batch;
    batch.seq = seq;
    while (auto line = reader.next_line()) {
        batch.lines.push_back(std::move(*line));
        if (batch.lines.size() >= kBatchLines) {
            if (failed.load(std::memory_order_relaxed)) break;
            queue.push(std::move(batch));
            batch = LineBatch{};
            batch.seq = ++seq;
        }
    }
    if (!batch.lines.empty() && !failed.load(std::memory_order_relaxed)) {
        queue.push(std::move(batch));
    }
    queue.close();
    for (auto& t : pool) t.join();

    if (worker_exception) std::rethrow_exception(worker_exception);
    if (strict && !error_reason.empty()) {
        throw IngestError(reports.string() + " line " + std::to_string(error_line) + ": " + error_reason);
    }

    SweepTotals totals;
    std::vector<std::pair<std::uint64_t, std::string>> merged;
    for (auto& d : diagnostics) merged.insert(merged.end(), d.begin(), d.end());
    std::sort(merged.begin(), merged.end());
    for (const auto& [line, reason] : merged) default_ingest_diagnostic(line, reason);
    totals.skipped = merged.size();
    for (auto n : shard_reports) totals.reports += n;
    return totals;
}

std::array<TokenStats, 4> make_category_stats() {
    return {TokenStats(LexicalCategory::BEH), TokenStats(LexicalCategory::PLAT),
            TokenStats(LexicalCategory::VULN), TokenStats(LexicalCategory::PACK)};
}

/// Distinct taggable tokens per category in one report, after the PRE/UNK
/// vocabulary upgrade, generic filtering, vulnerability-spelling
/// normalization, and (when given) the trivial-alias rewrite.
std::array<std::vector<std::string>, 4> taggable_tokens(const ScanReport& report, const RuleSet& rules,
                                                        const Vocabulary& vocabulary,
                                                        const std::array<AliasMap, 4>* rewrite) {
    std::array<std::set<std::string>, 4> sets;
    for (const auto& detection : report.detections) {
        ParsedLabel parsed;
        try {
            parsed = parse_label(detection.engine, detection.label, rules, vocabulary);
        } catch (const ValidationError&) {
            continue;
        }
        for (std::size_t i = 0; i < parsed.tokens.size(); ++i) {
            LexicalCategory category = parsed.categories[i];
            if (category == LexicalCategory::PRE || category == LexicalCategory::UNK) {
                if (auto known = vocabulary.lookup(parsed.tokens[i])) category = *known;
            }
            if (!is_taggable(category)) continue;
            if (vocabulary.is_generic(parsed.tokens[i])) continue;
            std::string token = category == LexicalCategory::VULN
                                    ? canonical_vuln_spelling(parsed.tokens[i])
                                    : parsed.tokens[i];
            if (rewrite) {
                const AliasMap& map = (*rewrite)[category_index(category)];
                if (auto it = map.find(token); it != map.end()) token = it->second;
            }
            sets[category_index(category)].insert(std::move(token));
        }
    }
    std::array<std::vector<std::string>, 4> out;
    for (std::size_t i = 0; i < 4; ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

void require_file(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is not configured");
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path.string());
}

AliasMap compose_alias_maps(const AliasMap& trivial, const AliasMap& parent_child,
                            const AliasMap& overrides) {
    AliasMap merged;
    for (const auto& [token, rep] : trivial) {
        if (overrides.contains(token)) continue;  // user mappings beat the rewrite
        auto it = parent_child.find(rep);
        merged[token] = it == parent_child.end() ? rep : it->second;
    }
    for (const auto& [token, canonical] : parent_child) merged.emplace(token, canonical);
    for (const auto& [token, canonical] : overrides) {
        (void)token;
        merged.erase(canonical);  // a user-pinned canonical name stays canonical
    }
    return close_alias_map(merged);
}

}  // namespace

SweepTotals sweep_fold(const fs::path& reports, bool strict, unsigned threads,
                       const std::function<void(const ScanReport&, unsigned)>& fold) {
    return run_sweep(reports, strict, threads, fold, nullptr, nullptr);
}

SweepTotals sweep_emit(const fs::path& reports, bool strict, unsigned threads,
                       const std::function<void(const ScanReport&, std::string&)>& emit,
                       std::ostream& sink) {
    return run_sweep(reports, strict, threads, nullptr, emit, &sink);
}

Pass1Result run_pass1(const PipelineConfig& config) {
    require_file(config.reports, "reports file");
    require_file(config.rules, "rule file");
    const RuleSet rules = load_rules(config.rules);
    Vocabulary vocabulary;
    if (!config.wordlist.empty()) vocabulary.load_wordlist(config.wordlist);

    const unsigned threads = std::max(1u, config.threads);
    std::vector<Vocabulary> vocab_shards(threads);
    std::vector<CorpusStats> corpus_shards(threads);
    Pass1Result result;
    result.totals =
        sweep_fold(config.reports, config.strict, threads, [&](const ScanReport& report, unsigned shard) {
            corpus_shards[shard].add(report);
            for (const auto& detection : report.detections) {
                try {
                    vocab_shards[shard].observe(parse_label(detection.engine, detection.label, rules, vocabulary));
                } catch (const ValidationError&) {
                }
            }
        });
    for (const auto& shard : vocab_shards) vocabulary.merge_counts(shard);
    vocabulary.promote();

    std::vector<std::array<TokenStats, 4>> stat_shards(threads, make_category_stats());
    sweep_fold(config.reports, config.strict, threads, [&](const ScanReport& report, unsigned shard) {
        auto per_category = taggable_tokens(report, rules, vocabulary, nullptr);
        for (std::size_t i = 0; i < 4; ++i) stat_shards[shard][i].add_report(per_category[i]);
    });
    std::array<TokenStats, 4> stats = make_category_stats();
    for (const auto& shard : stat_shards) {
        for (std::size_t i = 0; i < 4; ++i) stats[i].merge(shard[i]);
    }

    fs::create_directories(config.output_dir);
    vocabulary.save_wordlist(config.output_dir / kVocabularyFileName);
    save_token_stats(stats, config.output_dir / kTokenStatsFileName);

    for (const auto& shard : corpus_shards) {
        result.corpus.report_count += shard.report_count;
        result.corpus.label_count += shard.label_count;
        for (const auto& [engine, n] : shard.engine_counts) result.corpus.engine_counts[engine] += n;
    }
    result.resolved_tokens = vocabulary.resolved_size();
    result.generic_tokens = vocabulary.generic_size();
    return result;
}

AliasResult run_alias(const PipelineConfig& config) {
    require_file(config.reports, "reports file");
    require_file(config.rules, "rule file");
    const fs::path vocab_path = config.output_dir / kVocabularyFileName;
    const fs::path stats_path = config.output_dir / kTokenStatsFileName;
    if (!fs::exists(vocab_path) || !fs::exists(stats_path)) {
        throw ConfigError("missing first-pass outputs under " + config.output_dir.string() +
                          " (run pass1 first)");
    }

    const RuleSet rules = load_rules(config.rules);
    Vocabulary vocabulary;
    vocabulary.load_wordlist(vocab_path);
    AliasParams params = config.alias_params;
    if (!config.affixes.empty()) params.affixes = load_affix_file(config.affixes);

    const auto raw_stats = load_token_stats(stats_path);
    std::array<AliasMap, 4> trivial;
    for (std::size_t i = 0; i < 4; ++i) {
        trivial[i] = build_trivial_rewrite(raw_stats[i].token_counts(), params);
    }

    // Post-rewrite pair counts cannot be derived from the raw dump (report
    // overlap is lost in aggregation), so the corpus is swept again with the
    // rewrite applied.
    const unsigned threads = std::max(1u, config.threads);
    std::vector<std::array<TokenStats, 4>> stat_shards(threads, make_category_stats());
    AliasResult result;
    result.totals =
        sweep_fold(config.reports, config.strict, threads, [&](const ScanReport& report, unsigned shard) {
            auto per_category = taggable_tokens(report, rules, vocabulary, &trivial);
            for (std::size_t i = 0; i < 4; ++i) stat_shards[shard][i].add_report(per_category[i]);
        });
    std::array<TokenStats, 4> post = make_category_stats();
    for (const auto& shard : stat_shards) {
        for (std::size_t i = 0; i < 4; ++i) post[i].merge(shard[i]);
    }

    fs::create_directories(config.output_dir / kAliasDirName);
    for (std::size_t i = 0; i < 4; ++i) {
        const LexicalCategory category = kTaggableCategories[i];
        CandidateGraph graph = build_candidates(post[i], params);
        AliasMap overrides;
        if (!config.alias_overrides_dir.empty()) {
            const fs::path override_path = config.alias_overrides_dir / (category_key(category) + ".tsv");
            if (fs::exists(override_path)) overrides = load_alias_file(override_path);
        }
        const AliasMap parent_child = resolve_aliases(graph.tokens_by_freq, graph.children, overrides);
        const AliasMap final_map = compose_alias_maps(trivial[i], parent_child, overrides);
        save_alias_file(final_map, config.output_dir / kAliasDirName / (category_key(category) + ".tsv"));
        result.alias_counts[i] = final_map.size();
    }
    return result;
}

SweepTotals run_tag(const PipelineConfig& config) {
    require_file(config.reports, "reports file");
    require_file(config.rules, "rule file");
    const fs::path vocab_path = config.output_dir / kVocabularyFileName;
    if (!fs::exists(vocab_path)) {
        throw ConfigError("missing " + vocab_path.string() + " (run pass1 first)");
    }
    const fs::path alias_dir = config.output_dir / kAliasDirName;
    if (!fs::exists(alias_dir)) {
        throw ConfigError("missing " + alias_dir.string() + " (run alias first)");
    }

    const RuleSet rules = load_rules(config.rules);
    Vocabulary vocabulary;
    vocabulary.load_wordlist(vocab_path);
    const CategoryAliases aliases = load_category_aliases(alias_dir);
    CorrelationGroups groups;
    if (!config.correlations.empty()) groups = load_correlation_groups(config.correlations);

    const fs::path tag_path = config.output_dir / kTagFileName;
    std::ofstream out(tag_path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tag_path.string());
    SweepTotals totals;
    try {
        totals = sweep_emit(
            config.reports, config.strict, std::max(1u, config.threads),
            [&](const ScanReport& report, std::string& bytes) {
                TagRanking ranking = rank_tags(
                    report.file_id, score_tokens(report, rules, vocabulary, aliases, groups),
                    config.thresholds);
                ranking.source_chunk = report.source_chunk;
                bytes += tag_record_line(ranking);
                bytes += '\n';
            },
            out);
    } catch (...) {
        out.close();
        fs::remove(tag_path);
        throw;
    }
    if (!out.flush()) throw ConfigError("failed writing " + tag_path.string());
    return totals;
}

void save_token_stats(const std::array<TokenStats, 4>& stats, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write token stats " + path.string());
    for (const auto& category_stats : stats) {
        const std::string_view name = category_name(category_stats.category());
        for (const auto& [token, count] : category_stats.token_counts()) {
            out << "TOKEN\t" << name << '\t' << token << '\t' << count << '\n';
        }
        for (const auto& [pair, count] : category_stats.pair_counts()) {
            out << "PAIR\t" << name << '\t' << pair.first << '\t' << pair.second << '\t' << count << '\n';
        }
    }
    if (!out.flush()) throw ConfigError("failed writing token stats " + path.string());
}

std::array<TokenStats, 4> load_token_stats(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open token stats " + path.string());
    auto stats = make_category_stats();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        auto fields = split(line, '\t');
        auto parse_count = [&](std::string_view text) -> std::uint64_t {
            std::uint64_t n = 0;
            if (text.empty()) throw ConfigError(context + ": bad count");
            for (char c : text) {
                if (!ascii_digit(c)) throw ConfigError(context + ": bad count");
                n = n * 10 + static_cast<std::uint64_t>(c - '0');
            }
            return n;
        };
        auto category_slot = [&](std::string_view name) -> TokenStats& {
            auto category = parse_category(name);
            if (!category || !is_taggable(*category)) {
                throw ConfigError(context + ": unknown category \"" + std::string(name) + "\"");
            }
            return stats[category_index(*category)];
        };
        if (fields.size() == 4 && fields[0] == "TOKEN") {
            category_slot(fields[1]).add_token_count(fields[2], parse_count(fields[3]));
        } else if (fields.size() == 5 && fields[0] == "PAIR") {
            category_slot(fields[1]).add_pair_count(fields[2], fields[3], parse_count(fields[4]));
        } else {
            throw ConfigError(context + ": expected a TOKEN or PAIR record");
        }
    }
    return stats;
}

CategoryAliases load_category_aliases(const fs::path& dir) {
    CategoryAliases aliases;
    for (LexicalCategory category : kTaggableCategories) {
        const fs::path path = dir / (category_key(category) + ".tsv");
        if (fs::exists(path)) aliases.for_category(category) = load_alias_file(path);
    }
    return aliases;
}

namespace {

const nlohmann::json& expect_object(const nlohmann::json& value, const std::string& key) {
    if (!value.is_object()) throw ConfigError("config key \"" + key + "\" must be an object");
    return value;
}

std::string expect_string(const nlohmann::json& value, const std::string& key) {
    if (!value.is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
    return value.get<std::string>();
}

std::uint64_t expect_uint(const nlohmann::json& value, const std::string& key) {
    if (!value.is_number_unsigned()) {
        throw ConfigError("config key \"" + key + "\" must be a nonnegative integer");
    }
    return value.get<std::uint64_t>();
}

double expect_fraction(const nlohmann::json& value, const std::string& key) {
    if (!value.is_number()) throw ConfigError("config key \"" + key + "\" must be a number");
    return value.get<double>();
}

LexicalCategory taggable_or_throw(const std::string& key, const std::string& context) {
    for (LexicalCategory c : kTaggableCategories) {
        if (key == category_key(c)) return c;
    }
    throw ConfigError(context + ": unknown category \"" + key + "\"");
}

}  // namespace

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("config is not a JSON object: " + path.string());
    }

    PipelineConfig config;
    const fs::path base = path.parent_path();
    auto resolve = [&](const nlohmann::json& value, const std::string& key) {
        fs::path p = expect_string(value, key);
        return p.is_absolute() ? p : base / p;
    };

    for (const auto& [key, value] : doc.items()) {
        if (key == "reports") {
            config.reports = resolve(value, key);
        } else if (key == "rules") {
            config.rules = resolve(value, key);
        } else if (key == "wordlist") {
            config.wordlist = resolve(value, key);
        } else if (key == "affixes") {
            config.affixes = resolve(value, key);
        } else if (key == "correlations") {
            config.correlations = resolve(value, key);
        } else if (key == "alias_overrides_dir") {
            config.alias_overrides_dir = resolve(value, key);
        } else if (key == "output_dir") {
            config.output_dir = resolve(value, key);
        } else if (key == "thresholds") {
            for (const auto& [name, t] : expect_object(value, key).items()) {
                const std::uint64_t n = expect_uint(t, key + "." + name);
                if (n < 1 || n > 0xffffffffull) throw ConfigError("threshold " + name + " must be >= 1");
                config.thresholds.set(taggable_or_throw(name, key), static_cast<std::uint32_t>(n));
            }
        } else if (key == "alias") {
            for (const auto& [name, v] : expect_object(value, key).items()) {
                const double x = expect_fraction(v, key + "." + name);
                if (x <= 0.0 || x > 1.0) throw ConfigError(key + "." + name + " must be in (0, 1]");
                if (name == "escore_min") {
                    config.alias_params.escore_min = x;
                } else if (name == "coocur_escore_min") {
                    config.alias_params.coocur_escore_min = x;
                } else {
                    throw ConfigError("unknown config key \"" + key + "." + name + "\"");
                }
            }
        } else if (key == "split") {
            for (const auto& [name, v] : expect_object(value, key).items()) {
                if (name == "mode") {
                    const std::string mode = expect_string(v, key + ".mode");
                    if (mode == "temporal") {
                        config.split.mode = SplitConfig::Mode::temporal;
                    } else if (mode == "stratified") {
                        config.split.mode = SplitConfig::Mode::stratified;
                    } else {
                        throw ConfigError("split.mode must be \"temporal\" or \"stratified\"");
                    }
                } else if (name == "train_chunk_max") {
                    config.split.train_chunk_max = static_cast<std::uint32_t>(expect_uint(v, key + "." + name));
                } else if (name == "floors") {
                    for (const auto& [cat, f] : expect_object(v, key + ".floors").items()) {
                        const std::uint64_t floor = expect_uint(f, key + ".floors." + cat);
                        if (floor < 1) throw ConfigError("floor " + cat + " must be >= 1");
                        config.split.set_floor(taggable_or_throw(cat, key + ".floors"), floor);
                    }
                } else if (name == "train_cap_multiplier") {
                    config.split.train_cap_multiplier = expect_uint(v, key + "." + name);
                } else if (name == "test_cap_multiplier") {
                    config.split.test_cap_multiplier = expect_uint(v, key + "." + name);
                } else if (name == "test_fraction") {
                    const double f = expect_fraction(v, key + ".test_fraction");
                    if (f <= 0.0 || f >= 1.0) throw ConfigError("split.test_fraction must be in (0, 1)");
                    config.split.test_fraction = f;
                } else {
                    throw ConfigError("unknown config key \"" + key + "." + name + "\"");
                }
            }
        } else if (key == "seed") {
            config.split.rng_seed = expect_uint(value, key);
        } else if (key == "threads") {
            const std::uint64_t n = expect_uint(value, key);
            if (n < 1) throw ConfigError("threads must be >= 1");
            config.threads = static_cast<unsigned>(n);
        } else if (key == "strict") {
            if (!value.is_boolean()) throw ConfigError("config key \"strict\" must be a boolean");
            config.strict = value.get<bool>();
        } else {
            throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
    return config;
}

}  // namespace avtag
