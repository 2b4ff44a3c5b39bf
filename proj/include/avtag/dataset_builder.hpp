#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "avtag/lexical.hpp"
#include "avtag/tagger.hpp"

namespace avtag {

struct SplitConfig {
    enum class Mode { temporal, stratified };

    Mode mode = Mode::temporal;
    std::uint32_t train_chunk_max = 315;  // temporal: chunks <= this train, > this test
    std::array<std::uint64_t, 4> floors{1000, 500, 100, 50};  // BEH, PLAT, VULN, PACK
    std::uint64_t train_cap_multiplier = 100;
    std::uint64_t test_cap_multiplier = 25;
    double test_fraction = 0.2;
    std::uint64_t rng_seed = 0;

    std::uint64_t floor_for(LexicalCategory c) const { return floors[category_index(c)]; }
    void set_floor(LexicalCategory c, std::uint64_t f) { floors[category_index(c)] = f; }
};

/// Per-tag file lists for one category after frequency-floor filtering.
/// Files whose every tag fell below the floor are gone.
struct TagPopulation {
    LexicalCategory category = LexicalCategory::BEH;
    std::map<std::string, std::vector<std::string>> files_by_tag;  // tag -> sorted unique shas
    std::map<std::string, std::uint32_t> chunk_by_file;            // only files that had a chunk
};

/// Accumulates rankings, then keeps the tags carried by at least
/// floors[category] distinct files.
class TagCollector {
  public:
    explicit TagCollector(LexicalCategory category) : category_(category) {}

    void add(const TagRanking& ranking);
    TagPopulation finalize(const SplitConfig& config) const;

  private:
    LexicalCategory category_;
    std::map<std::string, std::set<std::string>> files_by_tag_;
    std::map<std::string, std::uint32_t> chunk_by_file_;
};

TagPopulation filter_tags(const std::vector<TagRanking>& rankings, LexicalCategory category,
                          const SplitConfig& config);

/// Streams a tag file through a TagCollector. Throws IngestError on
/// malformed lines.
TagPopulation filter_tags_file(const std::filesystem::path& tag_file, LexicalCategory category,
                               const SplitConfig& config);

struct ManifestEntry {
    std::string sha;
    bool test = false;
    std::vector<std::string> tags;  // tags this file was kept for, sorted
};

struct DatasetManifest {
    LexicalCategory category = LexicalCategory::BEH;
    SplitConfig config;
    std::vector<ManifestEntry> entries;  // train block first, each block sorted by sha
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> tag_counts;  // tag -> (train, test)
};

/// Splits by corpus chunk: files with chunk <= train_chunk_max train, the
/// rest test; then per-tag down-sampling to train_cap_multiplier x floor and
/// test_cap_multiplier x floor, uniform without replacement, seeded. Throws
/// ValidationError when a file has no chunk.
DatasetManifest temporal_split(const TagPopulation& population, const SplitConfig& config);

/// Greedy iterative stratification: tags in ascending support order each
/// draw their test quota (floor(count x test_fraction), at least 1 when the
/// tag has two files; rounding favors train) from their still-unassigned
/// files; every file is assigned to exactly one side. Caps as in
/// temporal_split.
DatasetManifest stratified_split(const TagPopulation& population, const SplitConfig& config);

/// Line-delimited manifest: a header record with the config echo, seed, and
/// per-tag counts, then one record per file sorted by (split, sha). Reruns
/// with equal inputs and seed are byte-identical.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Deterministic uniform draw from [0, n) using whole 64-bit words of the
/// generator (rejection sampling, no distribution objects).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace avtag
