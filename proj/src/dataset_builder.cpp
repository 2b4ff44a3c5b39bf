#include "avtag/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "avtag/errors.hpp"
#include "avtag/util.hpp"

namespace avtag {

void TagCollector::add(const TagRanking& ranking) {
    for (const auto& [tag, score] : ranking.for_category(category_)) {
        (void)score;
        files_by_tag_[tag].insert(ranking.file_id);
    }
    if (ranking.source_chunk) chunk_by_file_[ranking.file_id] = *ranking.source_chunk;
}

TagPopulation TagCollector::finalize(const SplitConfig& config) const {
    TagPopulation population;
    population.category = category_;
    const std::uint64_t floor = config.floor_for(category_);
    std::set<std::string> surviving_files;
    for (const auto& [tag, files] : files_by_tag_) {
        if (files.size() < floor) continue;
        population.files_by_tag.emplace(tag, std::vector<std::string>(files.begin(), files.end()));
        surviving_files.insert(files.begin(), files.end());
    }
    for (const auto& sha : surviving_files) {
        if (auto it = chunk_by_file_.find(sha); it != chunk_by_file_.end()) {
            population.chunk_by_file.emplace(sha, it->second);
        }
    }
    return population;
}

TagPopulation filter_tags(const std::vector<TagRanking>& rankings, LexicalCategory category,
                          const SplitConfig& config) {
    TagCollector collector(category);
    for (const auto& ranking : rankings) collector.add(ranking);
    return collector.finalize(config);
}

TagPopulation filter_tags_file(const std::filesystem::path& tag_file, LexicalCategory category,
                               const SplitConfig& config) {
    std::ifstream in(tag_file);
    if (!in) throw IngestError("cannot open tag file " + tag_file.string());
    TagCollector collector(category);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::string reason;
        auto ranking = parse_tag_line(line, reason);
        if (!ranking) {
            throw IngestError(tag_file.string() + " line " + std::to_string(lineno) + ": " + reason);
        }
        collector.add(*ranking);
    }
    return collector.finalize(config);
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const std::uint64_t v = rng();
        if (v < limit) return v % n;
    }
}

namespace {

/// Keeps `cap` of the (sorted) files, chosen uniformly without replacement;
/// output sorted. Consumes no randomness when everything fits.
std::vector<std::string> sample_files(std::vector<std::string> files, std::uint64_t cap,
                                      std::mt19937_64& rng) {
    if (files.size() <= cap) return files;
    for (std::uint64_t i = 0; i < cap; ++i) {
        const std::uint64_t j = i + uniform_below(rng, files.size() - i);
        std::swap(files[i], files[j]);
    }
    files.resize(cap);
    std::sort(files.begin(), files.end());
    return files;
}

DatasetManifest assemble_manifest(const TagPopulation& population, const SplitConfig& config,
                                  const std::map<std::string, std::vector<std::string>>& kept_train,
                                  const std::map<std::string, std::vector<std::string>>& kept_test) {
    DatasetManifest manifest;
    manifest.category = population.category;
    manifest.config = config;

    std::map<std::pair<bool, std::string>, std::vector<std::string>> tags_by_file;
    for (const auto& [tag, files] : kept_train) {
        for (const auto& sha : files) tags_by_file[{false, sha}].push_back(tag);
    }
    for (const auto& [tag, files] : kept_test) {
        for (const auto& sha : files) tags_by_file[{true, sha}].push_back(tag);
    }
    for (auto& [key, tags] : tags_by_file) {
        ManifestEntry entry;
        entry.test = key.first;
        entry.sha = key.second;
        std::sort(tags.begin(), tags.end());
        entry.tags = std::move(tags);
        manifest.entries.push_back(std::move(entry));
    }
    for (const auto& [tag, files] : population.files_by_tag) {
        (void)files;
        auto train_it = kept_train.find(tag);
        auto test_it = kept_test.find(tag);
        manifest.tag_counts[tag] = {train_it == kept_train.end() ? 0 : train_it->second.size(),
                                    test_it == kept_test.end() ? 0 : test_it->second.size()};
    }
    return manifest;
}

}  // namespace

DatasetManifest temporal_split(const TagPopulation& population, const SplitConfig& config) {
    const std::uint64_t floor = config.floor_for(population.category);
    const std::uint64_t train_cap = config.train_cap_multiplier * floor;
    const std::uint64_t test_cap = config.test_cap_multiplier * floor;

    std::mt19937_64 rng(config.rng_seed);
    std::map<std::string, std::vector<std::string>> kept_train, kept_test;
    for (const auto& [tag, files] : population.files_by_tag) {
        std::vector<std::string> train_candidates, test_candidates;
        for (const auto& sha : files) {
            auto chunk = population.chunk_by_file.find(sha);
            if (chunk == population.chunk_by_file.end()) {
                throw ValidationError("temporal split: file " + sha + " has no chunk");
            }
            (chunk->second <= config.train_chunk_max ? train_candidates : test_candidates).push_back(sha);
        }
        kept_train.emplace(tag, sample_files(std::move(train_candidates), train_cap, rng));
        kept_test.emplace(tag, sample_files(std::move(test_candidates), test_cap, rng));
    }
    return assemble_manifest(population, config, kept_train, kept_test);
}

DatasetManifest stratified_split(const TagPopulation& population, const SplitConfig& config) {
    const std::uint64_t floor = config.floor_for(population.category);
    const std::uint64_t train_cap = config.train_cap_multiplier * floor;
    const std::uint64_t test_cap = config.test_cap_multiplier * floor;

    std::mt19937_64 rng(config.rng_seed);

    // Rarest tags pick their test quota first, from files no earlier tag has
    // placed yet. Quotas round down (toward train) and already-assigned test
    // files count against the quota.
    std::vector<std::pair<std::string, std::size_t>> order;
    for (const auto& [tag, files] : population.files_by_tag) order.emplace_back(tag, files.size());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });

    std::map<std::string, bool> is_test;
    for (const auto& [tag, count] : order) {
        const auto& files = population.files_by_tag.at(tag);
        std::uint64_t desired = 0;
        if (count >= 2) {
            desired = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::floor(static_cast<double>(count) * config.test_fraction)));
        }
        std::uint64_t already = 0;
        std::vector<std::string> unassigned;
        for (const auto& sha : files) {
            auto it = is_test.find(sha);
            if (it == is_test.end()) {
                unassigned.push_back(sha);
            } else if (it->second) {
                ++already;
            }
        }
        const std::uint64_t need = desired > already ? std::min<std::uint64_t>(desired - already, unassigned.size()) : 0;
        const std::vector<std::string> chosen = sample_files(unassigned, need, rng);
        std::set<std::string> chosen_set(chosen.begin(), chosen.end());
        for (const auto& sha : unassigned) is_test[sha] = chosen_set.contains(sha);
    }

    std::map<std::string, std::vector<std::string>> kept_train, kept_test;
    for (const auto& [tag, files] : population.files_by_tag) {
        std::vector<std::string> train_files, test_files;
        for (const auto& sha : files) (is_test.at(sha) ? test_files : train_files).push_back(sha);
        kept_train.emplace(tag, sample_files(std::move(train_files), train_cap, rng));
        kept_test.emplace(tag, sample_files(std::move(test_files), test_cap, rng));
    }
    return assemble_manifest(population, config, kept_train, kept_test);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest " + path.string());

    nlohmann::ordered_json header;
    header["record"] = "header";
    header["category"] = category_key(manifest.category);
    header["mode"] = manifest.config.mode == SplitConfig::Mode::temporal ? "temporal" : "stratified";
    header["seed"] = manifest.config.rng_seed;
    header["floor"] = manifest.config.floor_for(manifest.category);
    header["train_cap_multiplier"] = manifest.config.train_cap_multiplier;
    header["test_cap_multiplier"] = manifest.config.test_cap_multiplier;
    if (manifest.config.mode == SplitConfig::Mode::temporal) {
        header["train_chunk_max"] = manifest.config.train_chunk_max;
    } else {
        header["test_fraction"] = manifest.config.test_fraction;
    }
    auto& counts = header["tag_counts"] = nlohmann::ordered_json::object();
    for (const auto& [tag, pair] : manifest.tag_counts) {
        counts[tag] = {{"train", pair.first}, {"test", pair.second}};
    }
    out << header.dump() << '\n';

    for (const auto& entry : manifest.entries) {
        nlohmann::ordered_json record;
        record["sha256"] = entry.sha;
        record["split"] = entry.test ? "test" : "train";
        record["tags"] = entry.tags;
        out << record.dump() << '\n';
    }
    if (!out.flush()) throw ConfigError("failed writing manifest " + path.string());
}

}  // namespace avtag
