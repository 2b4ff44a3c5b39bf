#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "avtag/lexical.hpp"

namespace avtag {

using FileSet = std::set<std::string>;

/// For each tag, the set of files carrying it.
struct TagAssignment {
    std::map<std::string, FileSet> files_by_tag;
};

/// Reads one taggable category out of a tag file (tag-output schema; scores
/// ignored). Throws IngestError on malformed lines.
TagAssignment load_tag_assignment(const std::filesystem::path& path, LexicalCategory category);

struct PerTagMetrics {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true;  // false when the tag has no predicted positives
    bool recall_defined = true;     // false when the tag has no reference positives
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per-tag counts plus micro (pooled counts) and weighted (reference-support
/// weights) averages. Every F1 is the harmonic mean of its own precision and
/// recall, 0 when both are 0.
struct MetricReport {
    std::map<std::string, PerTagMetrics> per_tag;
    AverageMetrics micro;
    AverageMetrics weighted;
};

/// Set-based multi-label precision/recall/F1 over the union of both tag
/// vocabularies. Zero-denominator metrics are reported as 0 and flagged.
MetricReport multilabel_metrics(const TagAssignment& predicted, const TagAssignment& reference);

/// Disjoint nonempty family -> file sets covering the evaluated universe.
struct FamilyPartition {
    std::map<std::string, FileSet> families;

    FileSet universe() const;
    /// Throws ValidationError when families overlap or are empty.
    void validate() const;
};

/// Family file: `sha256<TAB>family` per line, `#` comments. A file listed
/// under two families is a ConfigError.
FamilyPartition load_family_file(const std::filesystem::path& path);

/// Union of every family where at least half of the files carry the tag.
/// The boundary is inclusive: exactly 50% coverage counts.
FileSet family_consistency_sets(const FileSet& tagged, const FamilyPartition& families);

struct ConsistencyMetrics {
    double precision = 0.0;
    double recall = 0.0;
    bool precision_defined = true;  // false when the tagged set is empty
    bool recall_defined = true;     // false when the consistent set is empty
};

/// precision = |C n D| / |C|, recall = |C n D| / |D|, each 0 and flagged
/// when its denominator is empty.
ConsistencyMetrics family_consistency_metrics(const FileSet& tagged, const FileSet& consistent);

struct PerTagConsistency {
    ConsistencyMetrics metrics;
    std::uint64_t tagged_count = 0;      // |C_i|, after restriction to the family universe
    std::uint64_t consistent_count = 0;  // |D_i|
    std::uint64_t agreement_count = 0;   // |C_i n D_i|
};

/// Whole-assignment family-consistency evaluation. Tagged sets are first
/// intersected with the family universe; micro pools the counts and
/// weighted averages per-tag values by |C_i|.
struct FamilyConsistencyReport {
    std::map<std::string, PerTagConsistency> per_tag;
    ConsistencyMetrics micro;
    ConsistencyMetrics weighted;
};

FamilyConsistencyReport family_consistency_report(const TagAssignment& predicted,
                                                  const FamilyPartition& families);

}  // namespace avtag
