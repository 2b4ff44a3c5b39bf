#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "avtag/alias_resolver.hpp"
#include "avtag/dataset_builder.hpp"
#include "avtag/scan_report.hpp"
#include "avtag/tagger.hpp"

namespace avtag {

class RuleSet;
class Vocabulary;

/// Everything the pipeline stages need. Optional inputs (wordlist, affixes,
/// correlations, alias overrides) stay empty when absent.
struct PipelineConfig {
    std::filesystem::path reports;
    std::filesystem::path rules;
    std::filesystem::path wordlist;
    std::filesystem::path affixes;
    std::filesystem::path correlations;
    std::filesystem::path alias_overrides_dir;  // holds beh.tsv, plat.tsv, vuln.tsv, pack.tsv
    std::filesystem::path output_dir = "avtag-out";
    Thresholds thresholds;
    AliasParams alias_params;
    SplitConfig split;
    unsigned threads = 1;
    bool strict = false;
};

/// Reads a JSON config file; relative paths resolve against the config
/// file's directory. Unknown keys and out-of-range values are ConfigErrors.
PipelineConfig load_config(const std::filesystem::path& path);

/// File names under PipelineConfig::output_dir.
inline constexpr std::string_view kVocabularyFileName = "vocabulary.tsv";
inline constexpr std::string_view kTokenStatsFileName = "token_stats.tsv";
inline constexpr std::string_view kAliasDirName = "aliases";
inline constexpr std::string_view kTagFileName = "tags.jsonl";

/// Input totals of one corpus sweep.
struct SweepTotals {
    std::uint64_t reports = 0;
    std::uint64_t skipped = 0;
};

/// Streams the corpus through `fold`, which must be safe to call
/// concurrently for distinct `shard` values (0 <= shard < threads). Report
/// order across shards is unspecified; use this for commutative
/// accumulation only. In strict mode the first malformed line (by line
/// number) aborts with IngestError.
SweepTotals sweep_fold(const std::filesystem::path& reports, bool strict, unsigned threads,
                       const std::function<void(const ScanReport&, unsigned shard)>& fold);

/// Streams the corpus through `emit` and writes the produced bytes to
/// `sink` in input order. `emit` fills the buffer it is handed (always
/// empty on entry); it must be pure, as it runs concurrently.
SweepTotals sweep_emit(const std::filesystem::path& reports, bool strict, unsigned threads,
                       const std::function<void(const ScanReport&, std::string&)>& emit,
                       std::ostream& sink);

/// First pass: observe every parsed label, promote unanimous tokens, then
/// re-sweep for per-category token and pair report counts. Writes
/// vocabulary.tsv and token_stats.tsv under output_dir.
struct Pass1Result {
    CorpusStats corpus;
    SweepTotals totals;
    std::size_t resolved_tokens = 0;
    std::size_t generic_tokens = 0;
};
Pass1Result run_pass1(const PipelineConfig& config);

/// Alias stage: trivial-alias rewrite from pass1 counts, a re-sweep for
/// post-rewrite co-occurrence stats, parent-child resolution, user
/// overrides. Writes aliases/<category>.tsv under output_dir.
struct AliasResult {
    std::array<std::size_t, 4> alias_counts{};  // entries per taggable category
    SweepTotals totals;
};
AliasResult run_alias(const PipelineConfig& config);

/// Second pass: tags every report with the finalized vocabulary and alias
/// maps. Writes tags.jsonl under output_dir; returns input totals.
SweepTotals run_tag(const PipelineConfig& config);

/// Writes/reads the four per-category TokenStats as one TSV dump.
void save_token_stats(const std::array<TokenStats, 4>& stats, const std::filesystem::path& path);
std::array<TokenStats, 4> load_token_stats(const std::filesystem::path& path);

/// Loads the four aliases/<category>.tsv files that exist under `dir`.
CategoryAliases load_category_aliases(const std::filesystem::path& dir);

}  // namespace avtag
