#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "avtag/alias_resolver.hpp"
#include "avtag/errors.hpp"
#include "avtag/evaluator.hpp"
#include "avtag/label_parser.hpp"
#include "avtag/tagger.hpp"

namespace py = pybind11;
using namespace avtag;

namespace {

LexicalCategory category_from_lower_key(const std::string& key) {
    for (int i = 0; i < kCategoryCount; ++i) {
        auto c = static_cast<LexicalCategory>(i);
        if (key == category_key(c)) return c;
    }
    throw ConfigError("unknown lexical category \"" + key + "\"");
}

AliasParams params_from_affixes(const std::vector<std::string>& affixes) {
    AliasParams params;
    params.affixes = affixes;
    return params;
}

py::dict metrics_dict(const MetricReport& report) {
    py::dict per_tag;
    for (const auto& [tag, m] : report.per_tag) {
        py::dict d;
        d["tp"] = m.tp;
        d["fp"] = m.fp;
        d["fn"] = m.fn;
        d["precision"] = m.precision;
        d["recall"] = m.recall;
        d["f1"] = m.f1;
        per_tag[py::str(tag)] = d;
    }
    auto avg = [](const AverageMetrics& a) {
        py::dict d;
        d["precision"] = a.precision;
        d["recall"] = a.recall;
        d["f1"] = a.f1;
        return d;
    };
    py::dict out;
    out["per_tag"] = per_tag;
    out["micro"] = avg(report.micro);
    out["weighted"] = avg(report.weighted);
    return out;
}

}  // namespace

PYBIND11_MODULE(_avtag, m) {
    m.doc() = "AV scan-report label parsing, alias resolution, and evaluation primitives";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    m.def(
        "tokenize",
        [](const std::string& label) {
            TokenizedLabel t = tokenize(label);
            return py::make_tuple(t.tokens, t.format);
        },
        py::arg("label"),
        "Split a label into lowercase alphanumeric tokens and its delimiter format.");

    m.def(
        "levenshtein",
        [](const std::string& a, const std::string& b) { return levenshtein(a, b); },
        py::arg("a"), py::arg("b"), "Classic edit distance with unit costs.");

    m.def(
        "escore", [](const std::string& a, const std::string& b) { return escore(a, b); },
        py::arg("a"), py::arg("b"),
        "1 - edist/min(len), floored at 0.75 for substrings and anagrams.");

    m.def(
        "is_generic_suffix",
        [](const std::string& token) { return is_generic_suffix(token); }, py::arg("token"),
        "True for short trailing variant tokens.");

    m.def(
        "canonical_vuln_spelling",
        [](const std::string& token) { return canonical_vuln_spelling(token); }, py::arg("token"),
        "Normalize concatenated vulnerability identifiers (cve20170144 -> cve_2017_0144).");

    m.def(
        "is_trivial_alias",
        [](const std::string& a, const std::string& b, const std::vector<std::string>& affixes) {
            return is_trivial_alias(a, b, params_from_affixes(affixes));
        },
        py::arg("a"), py::arg("b"), py::arg("affixes") = std::vector<std::string>{},
        "One trailing character apart, or equal after one affix strip.");

    py::class_<TokenStats>(m, "TokenStats",
                           "Report-level token and pair counts for one lexical category.")
        .def(py::init([](const std::string& category) {
                 return TokenStats(category_from_lower_key(category));
             }),
             py::arg("category") = "beh")
        .def("add_report",
             [](TokenStats& self, std::vector<std::string> tokens) {
                 std::sort(tokens.begin(), tokens.end());
                 tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
                 self.add_report(tokens);
             },
             py::arg("tokens"), "Record one report's distinct tokens of this category.")
        .def("token_count",
             [](const TokenStats& self, const std::string& token) { return self.token_count(token); },
             py::arg("token"))
        .def("pair_count",
             [](const TokenStats& self, const std::string& a, const std::string& b) {
                 return self.pair_count(a, b);
             },
             py::arg("a"), py::arg("b"));

    m.def(
        "coocur",
        [](const std::string& child, const std::string& parent, const TokenStats& stats) {
            return coocur(child, parent, stats);
        },
        py::arg("child"), py::arg("parent"), py::arg("stats"),
        "Fraction of the child's reports that also contain the parent.");

    m.def(
        "is_parent_child",
        [](const std::string& child, const std::string& parent, const TokenStats& stats,
           double escore_min, double coocur_escore_min) {
            AliasParams params;
            params.escore_min = escore_min;
            params.coocur_escore_min = coocur_escore_min;
            return is_parent_child(child, parent, stats, params);
        },
        py::arg("child"), py::arg("parent"), py::arg("stats"), py::arg("escore_min") = 0.6,
        py::arg("coocur_escore_min") = 0.5);

    m.def(
        "build_trivial_rewrite",
        [](const std::map<std::string, std::uint64_t>& counts,
           const std::vector<std::string>& affixes) {
            std::map<std::string, std::uint64_t, std::less<>> ordered(counts.begin(), counts.end());
            AliasMap rewrite = build_trivial_rewrite(ordered, params_from_affixes(affixes));
            return std::map<std::string, std::string>(rewrite.begin(), rewrite.end());
        },
        py::arg("token_counts"), py::arg("affixes") = std::vector<std::string>{},
        "Map each token of a trivially-aliased group to its most frequent spelling.");

    m.def(
        "resolve_aliases",
        [](const std::vector<std::string>& tokens_by_freq,
           const std::map<std::string, std::vector<std::string>>& children,
           const std::map<std::string, std::string>& overrides) {
            AliasMap over(overrides.begin(), overrides.end());
            AliasMap out = resolve_aliases(tokens_by_freq, children, over);
            return std::map<std::string, std::string>(out.begin(), out.end());
        },
        py::arg("tokens_by_freq"), py::arg("children"),
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Resolve parent-child aliases over a candidate graph; overrides win.");

    m.def(
        "family_consistency_sets",
        [](const std::set<std::string>& tagged,
           const std::map<std::string, std::set<std::string>>& families) {
            FamilyPartition partition;
            for (const auto& [name, files] : families) partition.families[name] = files;
            partition.validate();
            return family_consistency_sets(tagged, partition);
        },
        py::arg("tagged"), py::arg("families"),
        "Union of families where at least half of the files carry the tag.");

    m.def(
        "family_consistency_metrics",
        [](const std::set<std::string>& tagged, const std::set<std::string>& consistent) {
            ConsistencyMetrics metrics = family_consistency_metrics(tagged, consistent);
            return py::make_tuple(metrics.precision, metrics.recall);
        },
        py::arg("tagged"), py::arg("consistent"),
        "(precision, recall) of a tagged set against its consistent set.");

    m.def(
        "multilabel_metrics",
        [](const std::map<std::string, std::set<std::string>>& predicted,
           const std::map<std::string, std::set<std::string>>& reference) {
            TagAssignment p;
            TagAssignment r;
            for (const auto& [tag, files] : predicted) p.files_by_tag[tag] = files;
            for (const auto& [tag, files] : reference) r.files_by_tag[tag] = files;
            return metrics_dict(multilabel_metrics(p, r));
        },
        py::arg("predicted"), py::arg("reference"),
        "Per-tag, micro, and support-weighted precision/recall/F1.");
}
