#include <doctest.h>

#include <random>
#include <string>

#include "avtag/errors.hpp"
#include "avtag/evaluator.hpp"
#include "test_helpers.hpp"

using namespace avtag;
using testutil::TempDir;
using testutil::sha;
using testutil::write_file;

namespace {

TagAssignment assignment(std::map<std::string, FileSet> m) {
    TagAssignment out;
    out.files_by_tag = std::move(m);
    return out;
}

FamilyPartition partition(std::map<std::string, FileSet> m) {
    FamilyPartition out;
    out.families = std::move(m);
    out.validate();
    return out;
}

}  // namespace

TEST_CASE("multilabel per-tag counts") {
    TagAssignment predicted = assignment({{"worm", {"f1", "f2", "f3"}}});
    TagAssignment reference = assignment({{"worm", {"f2", "f3", "f4"}}});

    MetricReport report = multilabel_metrics(predicted, reference);
    const PerTagMetrics& worm = report.per_tag.at("worm");
    CHECK(worm.tp == 2);
    CHECK(worm.fp == 1);
    CHECK(worm.fn == 1);
    CHECK(worm.precision == doctest::Approx(2.0 / 3.0));
    CHECK(worm.recall == doctest::Approx(2.0 / 3.0));
    CHECK(worm.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("multilabel micro pools counts across tags") {
    // worm: tp 1, fp 1; upx: tp 1, fn 1.
    TagAssignment predicted = assignment({{"worm", {"f1", "f2"}}, {"upx", {"f3"}}});
    TagAssignment reference = assignment({{"worm", {"f1"}}, {"upx", {"f3", "f4"}}});

    MetricReport report = multilabel_metrics(predicted, reference);
    CHECK(report.micro.precision == doctest::Approx(2.0 / 3.0));
    CHECK(report.micro.recall == doctest::Approx(2.0 / 3.0));

    // Weighted averages use reference support (worm 1, upx 2).
    const double wp = (1.0 * (1.0 / 2.0) + 2.0 * 1.0) / 3.0;
    const double wr = (1.0 * 1.0 + 2.0 * (1.0 / 2.0)) / 3.0;
    CHECK(report.weighted.precision == doctest::Approx(wp));
    CHECK(report.weighted.recall == doctest::Approx(wr));
}

TEST_CASE("multilabel covers the union of tag vocabularies") {
    TagAssignment predicted = assignment({{"onlypred", {"f1"}}});
    TagAssignment reference = assignment({{"onlyref", {"f1"}}});

    MetricReport report = multilabel_metrics(predicted, reference);
    REQUIRE(report.per_tag.size() == 2);

    const PerTagMetrics& pred_only = report.per_tag.at("onlypred");
    CHECK(pred_only.fp == 1);
    CHECK(pred_only.recall == 0.0);
    CHECK_FALSE(pred_only.recall_defined);  // no reference positives

    const PerTagMetrics& ref_only = report.per_tag.at("onlyref");
    CHECK(ref_only.fn == 1);
    CHECK(ref_only.precision == 0.0);
    CHECK_FALSE(ref_only.precision_defined);  // no predicted positives

    CHECK(report.micro.precision == 0.0);
    CHECK(report.micro.recall == 0.0);
    CHECK(report.micro.f1 == 0.0);
}

TEST_CASE("micro metrics are invariant under tag renaming") {
    std::mt19937_64 rng(21);
    for (int iter = 0; iter < 50; ++iter) {
        TagAssignment predicted;
        TagAssignment reference;
        for (int t = 0; t < 5; ++t) {
            std::string tag = "tag" + std::to_string(t);
            for (int f = 0; f < 8; ++f) {
                if (rng() % 2) predicted.files_by_tag[tag].insert(sha(static_cast<unsigned>(f)));
                if (rng() % 2) reference.files_by_tag[tag].insert(sha(static_cast<unsigned>(f)));
            }
        }

        TagAssignment renamed_pred;
        TagAssignment renamed_ref;
        for (const auto& [tag, files] : predicted.files_by_tag) {
            renamed_pred.files_by_tag["x" + tag] = files;
        }
        for (const auto& [tag, files] : reference.files_by_tag) {
            renamed_ref.files_by_tag["x" + tag] = files;
        }

        MetricReport a = multilabel_metrics(predicted, reference);
        MetricReport b = multilabel_metrics(renamed_pred, renamed_ref);
        CHECK(a.micro.precision == b.micro.precision);
        CHECK(a.micro.recall == b.micro.recall);
        CHECK(a.micro.f1 == b.micro.f1);
    }
}

TEST_CASE("f1 is the harmonic mean of its own precision and recall") {
    TagAssignment predicted = assignment({{"t", {"f1", "f2", "f3", "f4"}}});
    TagAssignment reference = assignment({{"t", {"f1"}}});
    MetricReport report = multilabel_metrics(predicted, reference);
    const PerTagMetrics& m = report.per_tag.at("t");
    CHECK(m.precision == doctest::Approx(0.25));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(2 * 0.25 * 1.0 / (0.25 + 1.0)));
}

TEST_CASE("family partition validation") {
    FamilyPartition overlapping;
    overlapping.families = {{"a", {"f1", "f2"}}, {"b", {"f2"}}};
    CHECK_THROWS_AS(overlapping.validate(), ValidationError);

    FamilyPartition empty_family;
    empty_family.families = {{"a", {}}};
    CHECK_THROWS_AS(empty_family.validate(), ValidationError);

    FamilyPartition good;
    good.families = {{"a", {"f1"}}, {"b", {"f2", "f3"}}};
    good.validate();
    CHECK(good.universe() == FileSet{"f1", "f2", "f3"});
}

TEST_CASE("family_consistency_sets: half coverage is inclusive") {
    FamilyPartition families = partition({{"fam1", {"m1", "m2", "m3", "m4"}},
                                          {"fam2", {"m5", "m6"}},
                                          {"fam3", {"m7", "m8", "m9"}}});

    // fam1: 2/4 = 0.5 -> in. fam2: 1/2 = 0.5 -> in. fam3: 1/3 < 0.5 -> out.
    FileSet tagged = {"m1", "m2", "m5", "m7"};
    FileSet consistent = family_consistency_sets(tagged, families);
    CHECK(consistent == FileSet{"m1", "m2", "m3", "m4", "m5", "m6"});
}

TEST_CASE("family_consistency_sets: no family reaches half") {
    FamilyPartition families = partition({{"fam1", {"m1", "m2", "m3"}}});
    FileSet tagged = {"m1"};
    CHECK(family_consistency_sets(tagged, families).empty());
    CHECK(family_consistency_sets({}, families).empty());
}

TEST_CASE("worked consistency example: precision 1.0, recall 0.75") {
    FamilyPartition families = partition({{"fam1", {"m1", "m2", "m3", "m4"}},
                                          {"fam2", {"m5", "m6"}}});
    FileSet tagged = {"m1", "m2", "m3"};
    FileSet consistent = family_consistency_sets(tagged, families);
    CHECK(consistent == FileSet{"m1", "m2", "m3", "m4"});

    ConsistencyMetrics metrics = family_consistency_metrics(tagged, consistent);
    CHECK(metrics.precision == doctest::Approx(1.0));
    CHECK(metrics.recall == doctest::Approx(0.75));
    CHECK(metrics.precision_defined);
    CHECK(metrics.recall_defined);
}

TEST_CASE("consistency metrics flag empty denominators") {
    ConsistencyMetrics no_tagged = family_consistency_metrics({}, {"m1"});
    CHECK(no_tagged.precision == 0.0);
    CHECK_FALSE(no_tagged.precision_defined);
    CHECK(no_tagged.recall == 0.0);

    ConsistencyMetrics no_consistent = family_consistency_metrics({"m1"}, {});
    CHECK(no_consistent.recall == 0.0);
    CHECK_FALSE(no_consistent.recall_defined);
    CHECK(no_consistent.precision == 0.0);
}

TEST_CASE("growing the tagged set never shrinks the consistent set") {
    std::mt19937_64 rng(31);
    FamilyPartition families = partition({{"fam1", {"a1", "a2", "a3"}},
                                          {"fam2", {"b1", "b2", "b3", "b4"}},
                                          {"fam3", {"c1"}}});
    std::vector<std::string> universe = {"a1", "a2", "a3", "b1", "b2", "b3", "b4", "c1"};
    for (int iter = 0; iter < 100; ++iter) {
        FileSet tagged;
        for (const auto& f : universe) {
            if (rng() % 2) tagged.insert(f);
        }
        FileSet before = family_consistency_sets(tagged, families);

        FileSet larger = tagged;
        larger.insert(universe[rng() % universe.size()]);
        FileSet after = family_consistency_sets(larger, families);

        for (const auto& f : before) CHECK(after.contains(f));
    }
}

TEST_CASE("singleton families are consistent exactly when tagged") {
    FamilyPartition families = partition({{"solo", {"m1"}}, {"duo", {"m2", "m3"}}});
    CHECK(family_consistency_sets({"m1"}, families) == FileSet{"m1"});
    CHECK(family_consistency_sets({"m2"}, families) == FileSet{"m2", "m3"});
    CHECK(family_consistency_sets({"m3", "m1"}, families) == FileSet{"m1", "m2", "m3"});
}

TEST_CASE("family_consistency_report restricts to the universe and averages") {
    FamilyPartition families = partition({{"fam1", {"m1", "m2"}}, {"fam2", {"m3", "m4"}}});

    TagAssignment predicted = assignment({
        {"worm", {"m1", "m2", "m3", "outside"}},  // outside the universe: ignored
        {"upx", {"m3"}},
    });

    FamilyConsistencyReport report = family_consistency_report(predicted, families);

    const PerTagConsistency& worm = report.per_tag.at("worm");
    CHECK(worm.tagged_count == 3);                 // outside dropped
    CHECK(worm.consistent_count == 4);             // fam1 full, fam2 half (inclusive)
    CHECK(worm.agreement_count == 3);
    CHECK(worm.metrics.precision == doctest::Approx(1.0));
    CHECK(worm.metrics.recall == doctest::Approx(0.75));

    const PerTagConsistency& upx = report.per_tag.at("upx");
    CHECK(upx.tagged_count == 1);
    CHECK(upx.consistent_count == 2);
    CHECK(upx.metrics.precision == doctest::Approx(1.0));
    CHECK(upx.metrics.recall == doctest::Approx(0.5));

    // Micro pools: |C| = 4, |D| = 6, |C n D| = 4.
    CHECK(report.micro.precision == doctest::Approx(1.0));
    CHECK(report.micro.recall == doctest::Approx(4.0 / 6.0));

    // Weighted by |C_i|: (3 * 1.0 + 1 * 1.0) / 4 and (3 * 0.75 + 1 * 0.5) / 4.
    CHECK(report.weighted.precision == doctest::Approx(1.0));
    CHECK(report.weighted.recall == doctest::Approx((3 * 0.75 + 1 * 0.5) / 4.0));
}

TEST_CASE("family file loading") {
    TempDir dir;

    SUBCASE("valid file") {
        auto path = write_file(dir.file("families.tsv"),
                               "# truth\n" + sha(1) + "\temotet\n" + sha(2) + "\temotet\n" +
                                   sha(3) + "\twannacry\n");
        FamilyPartition families = load_family_file(path);
        CHECK(families.families.size() == 2);
        CHECK(families.families.at("emotet") == FileSet{sha(1), sha(2)});
        CHECK(families.universe().size() == 3);
    }

    SUBCASE("duplicate file id names the line") {
        auto path = write_file(dir.file("families.tsv"),
                               sha(1) + "\temotet\n" + sha(1) + "\twannacry\n");
        CHECK_THROWS_WITH_AS(load_family_file(path), doctest::Contains("line 2"), ConfigError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_family_file(dir.file("absent.tsv")), ConfigError);
    }
}

TEST_CASE("load_tag_assignment reads one category") {
    TempDir dir;
    std::string lines =
        "{\"sha256\":\"" + sha(1) + "\",\"beh\":[{\"tag\":\"worm\",\"score\":7}],"
        "\"plat\":[{\"tag\":\"js\",\"score\":6}],\"vuln\":[],\"pack\":[]}\n" +
        "{\"sha256\":\"" + sha(2) + "\",\"beh\":[{\"tag\":\"worm\"}],"
        "\"plat\":[],\"vuln\":[],\"pack\":[]}\n";
    auto path = write_file(dir.file("tags.jsonl"), lines);

    TagAssignment beh = load_tag_assignment(path, LexicalCategory::BEH);
    CHECK(beh.files_by_tag.at("worm") == FileSet{sha(1), sha(2)});

    TagAssignment plat = load_tag_assignment(path, LexicalCategory::PLAT);
    CHECK(plat.files_by_tag.at("js") == FileSet{sha(1)});
    CHECK(plat.files_by_tag.count("worm") == 0);

    auto bad = write_file(dir.file("bad.jsonl"), "not json\n");
    CHECK_THROWS_AS(load_tag_assignment(bad, LexicalCategory::BEH), IngestError);
}
