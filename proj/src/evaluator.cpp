#include "avtag/evaluator.hpp"

#include <algorithm>
#include <fstream>

#include "avtag/errors.hpp"
#include "avtag/scan_ingest.hpp"
#include "avtag/tagger.hpp"
#include "avtag/util.hpp"

namespace avtag {
namespace {

std::uint64_t intersection_size(const FileSet& a, const FileSet& b) {
    const FileSet& small = a.size() <= b.size() ? a : b;
    const FileSet& large = a.size() <= b.size() ? b : a;
    std::uint64_t n = 0;
    for (const auto& x : small) n += large.contains(x);
    return n;
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) {
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

TagAssignment load_tag_assignment(const std::filesystem::path& path, LexicalCategory category) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open tag file " + path.string());
    TagAssignment assignment;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::string reason;
        auto ranking = parse_tag_line(line, reason);
        if (!ranking) {
            throw IngestError(path.string() + " line " + std::to_string(lineno) + ": " + reason);
        }
        for (const auto& [tag, score] : ranking->for_category(category)) {
            (void)score;
            assignment.files_by_tag[tag].insert(ranking->file_id);
        }
    }
    return assignment;
}

MetricReport multilabel_metrics(const TagAssignment& predicted, const TagAssignment& reference) {
    static const FileSet kEmpty;
    std::set<std::string> tags;
    for (const auto& [tag, files] : predicted.files_by_tag) {
        (void)files;
        tags.insert(tag);
    }
    for (const auto& [tag, files] : reference.files_by_tag) {
        (void)files;
        tags.insert(tag);
    }

    MetricReport report;
    std::uint64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    double weight_total = 0.0, weighted_p = 0.0, weighted_r = 0.0;
    for (const auto& tag : tags) {
        auto pit = predicted.files_by_tag.find(tag);
        auto rit = reference.files_by_tag.find(tag);
        const FileSet& p = pit == predicted.files_by_tag.end() ? kEmpty : pit->second;
        const FileSet& r = rit == reference.files_by_tag.end() ? kEmpty : rit->second;

        PerTagMetrics m;
        m.tp = intersection_size(p, r);
        m.fp = p.size() - m.tp;
        m.fn = r.size() - m.tp;
        m.precision_defined = m.tp + m.fp > 0;
        m.recall_defined = m.tp + m.fn > 0;
        m.precision = ratio(m.tp, m.tp + m.fp);
        m.recall = ratio(m.tp, m.tp + m.fn);
        m.f1 = harmonic(m.precision, m.recall);

        pooled_tp += m.tp;
        pooled_fp += m.fp;
        pooled_fn += m.fn;
        const double support = static_cast<double>(r.size());
        weight_total += support;
        weighted_p += support * m.precision;
        weighted_r += support * m.recall;
        report.per_tag.emplace(tag, m);
    }

    report.micro.precision = ratio(pooled_tp, pooled_tp + pooled_fp);
    report.micro.recall = ratio(pooled_tp, pooled_tp + pooled_fn);
    report.micro.f1 = harmonic(report.micro.precision, report.micro.recall);
    report.weighted.precision = weight_total == 0.0 ? 0.0 : weighted_p / weight_total;
    report.weighted.recall = weight_total == 0.0 ? 0.0 : weighted_r / weight_total;
    report.weighted.f1 = harmonic(report.weighted.precision, report.weighted.recall);
    return report;
}

FileSet FamilyPartition::universe() const {
    FileSet all;
    for (const auto& [family, files] : families) {
        (void)family;
        all.insert(files.begin(), files.end());
    }
    return all;
}

void FamilyPartition::validate() const {
    FileSet seen;
    for (const auto& [family, files] : families) {
        if (files.empty()) throw ValidationError("family \"" + family + "\" is empty");
        for (const auto& file : files) {
            if (!seen.insert(file).second) {
                throw ValidationError("file " + file + " belongs to two families");
            }
        }
    }
}

FamilyPartition load_family_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open family file " + path.string());
    FamilyPartition partition;
    FileSet seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_line(line)) continue;
        const std::string context = path.filename().string() + " line " + std::to_string(lineno);
        auto fields = split(line, '\t');
        if (fields.size() != 2) throw ConfigError(context + ": expected sha256<TAB>family");
        std::string sha = to_lower(trim(fields[0]));
        std::string family = std::string(trim(fields[1]));
        if (!is_lower_hex64(sha)) throw ConfigError(context + ": invalid sha256");
        if (family.empty()) throw ConfigError(context + ": empty family name");
        if (!seen.insert(sha).second) throw ConfigError(context + ": file listed in two families");
        partition.families[family].insert(std::move(sha));
    }
    return partition;
}

FileSet family_consistency_sets(const FileSet& tagged, const FamilyPartition& families) {
    FileSet consistent;
    for (const auto& [family, files] : families.families) {
        (void)family;
        // inclusive half: 2*|C n F| >= |F|, in exact integer arithmetic
        if (2 * intersection_size(tagged, files) >= files.size()) {
            consistent.insert(files.begin(), files.end());
        }
    }
    return consistent;
}

ConsistencyMetrics family_consistency_metrics(const FileSet& tagged, const FileSet& consistent) {
    const std::uint64_t agree = intersection_size(tagged, consistent);
    ConsistencyMetrics m;
    m.precision_defined = !tagged.empty();
    m.recall_defined = !consistent.empty();
    m.precision = ratio(agree, tagged.size());
    m.recall = ratio(agree, consistent.size());
    return m;
}

FamilyConsistencyReport family_consistency_report(const TagAssignment& predicted,
                                                  const FamilyPartition& families) {
    families.validate();
    const FileSet universe = families.universe();

    FamilyConsistencyReport report;
    std::uint64_t pooled_tagged = 0, pooled_consistent = 0, pooled_agree = 0;
    double weight_total = 0.0, weighted_p = 0.0, weighted_r = 0.0;
    for (const auto& [tag, raw_tagged] : predicted.files_by_tag) {
        FileSet tagged;
        for (const auto& file : raw_tagged) {
            if (universe.contains(file)) tagged.insert(file);
        }
        PerTagConsistency entry;
        const FileSet consistent = family_consistency_sets(tagged, families);
        entry.metrics = family_consistency_metrics(tagged, consistent);
        entry.tagged_count = tagged.size();
        entry.consistent_count = consistent.size();
        entry.agreement_count = intersection_size(tagged, consistent);

        pooled_tagged += entry.tagged_count;
        pooled_consistent += entry.consistent_count;
        pooled_agree += entry.agreement_count;
        const double weight = static_cast<double>(entry.tagged_count);
        weight_total += weight;
        weighted_p += weight * entry.metrics.precision;
        weighted_r += weight * entry.metrics.recall;
        report.per_tag.emplace(tag, std::move(entry));
    }

    report.micro.precision_defined = pooled_tagged > 0;
    report.micro.recall_defined = pooled_consistent > 0;
    report.micro.precision = ratio(pooled_agree, pooled_tagged);
    report.micro.recall = ratio(pooled_agree, pooled_consistent);
    report.weighted.precision_defined = weight_total > 0.0;
    report.weighted.recall_defined = weight_total > 0.0;
    report.weighted.precision = weight_total == 0.0 ? 0.0 : weighted_p / weight_total;
    report.weighted.recall = weight_total == 0.0 ? 0.0 : weighted_r / weight_total;
    return report;
}

}  // namespace avtag
