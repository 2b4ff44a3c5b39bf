#include <doctest.h>

#include <string>
#include <vector>

#include "avtag/errors.hpp"
#include "avtag/scan_ingest.hpp"
#include "test_helpers.hpp"

using namespace avtag;
using testutil::sha;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::optional<ScanReport> parse_line(const std::string& line) {
    std::string reason;
    return parse_report_line(line, reason);
}

}  // namespace

TEST_CASE("minimal well-formed record yields one detection") {
    auto report = parse_line("{\"sha256\":\"" + sha(0) + "\",\"scans\":{\"EngA\":\"Trojan:Win32.Androm.abc\"}}");
    REQUIRE(report.has_value());
    CHECK(report->file_id == sha(0));
    REQUIRE(report->detections.size() == 1);
    CHECK(report->detections[0].engine == "enga");
    CHECK(report->detections[0].label == "Trojan:Win32.Androm.abc");
    CHECK_FALSE(report->source_chunk.has_value());
}

TEST_CASE("duplicate engine keeps only the first entry") {
    auto report = parse_line("{\"sha256\":\"" + sha(1) +
                             "\",\"scans\":{\"EngA\":\"First.Label\",\"EngA\":\"Second.Label\"}}");
    REQUIRE(report.has_value());
    REQUIRE(report->detections.size() == 1);
    CHECK(report->detections[0].label == "First.Label");
}

TEST_CASE("empty label drops that detection and keeps the rest") {
    auto report = parse_line("{\"sha256\":\"" + sha(2) +
                             "\",\"scans\":{\"EngA\":\"\",\"EngB\":\"Worm.X\"}}");
    REQUIRE(report.has_value());
    REQUIRE(report->detections.size() == 1);
    CHECK(report->detections[0].engine == "engb");
}

TEST_CASE("optional fields parse and engine names are normalized") {
    auto report = parse_line("{\"sha256\":\"" + sha(3) +
                             "\",\"scans\":{\"  McAfee \":\"W32/X.a\"},\"scan_time\":\"2023-03-01T00:00:00Z\","
                             "\"chunk\":42,\"extra\":[1,2,{\"deep\":true}]}");
    REQUIRE(report.has_value());
    CHECK(report->detections[0].engine == "mcafee");
    CHECK(report->scan_time == "2023-03-01T00:00:00Z");
    REQUIRE(report->source_chunk.has_value());
    CHECK(*report->source_chunk == 42u);
}

TEST_CASE("malformed records are rejected with a reason") {
    std::string reason;
    CHECK_FALSE(parse_report_line("not json", reason));
    CHECK(reason == "invalid JSON");
    CHECK_FALSE(parse_report_line("{\"scans\":{}}", reason));
    CHECK_FALSE(parse_report_line("{\"sha256\":\"xyz\",\"scans\":{}}", reason));
    CHECK(reason == "invalid sha256");
    CHECK_FALSE(parse_report_line("{\"sha256\":\"" + sha(4) + "\",\"scans\":{},\"chunk\":-1}", reason));
    CHECK_FALSE(parse_report_line("{\"sha256\":\"" + sha(4) + "\"}", reason));
    CHECK_FALSE(parse_report_line("[1,2,3]", reason));
}

TEST_CASE("sha256 is lowercased on ingest") {
    std::string upper = sha(255);
    for (auto& c : upper) c = static_cast<char>(std::toupper(c));
    auto report = parse_line("{\"sha256\":\"" + upper + "\",\"scans\":{\"e\":\"A.b\"}}");
    REQUIRE(report.has_value());
    CHECK(report->file_id == sha(255));
}

TEST_CASE("reader streams valid lines in order and skips bad ones when lenient") {
    TempDir dir;
    std::string text;
    text += "{\"sha256\":\"" + sha(1) + "\",\"scans\":{\"a\":\"X.y\"}}\n";
    text += "\n";                // blank lines are not records
    text += "broken\n";
    text += "{\"sha256\":\"" + sha(2) + "\",\"scans\":{\"a\":\"X.y\"}}\r\n";
    auto path = write_file(dir.file("corpus.jsonl"), text);

    std::vector<std::uint64_t> diagnosed;
    ReportReader reader(path, /*strict=*/false,
                        [&](std::uint64_t line, const std::string&) { diagnosed.push_back(line); });
    std::vector<std::string> ids;
    while (auto report = reader.next()) ids.push_back(report->file_id);
    CHECK(ids == std::vector<std::string>{sha(1), sha(2)});
    CHECK(diagnosed == std::vector<std::uint64_t>{3});
    CHECK(reader.records_skipped() == 1);
}

TEST_CASE("strict reader aborts with the line number") {
    TempDir dir;
    auto path = write_file(dir.file("corpus.jsonl"),
                           "{\"sha256\":\"" + sha(1) + "\",\"scans\":{\"a\":\"X.y\"}}\nbroken\n");
    ReportReader reader(path, /*strict=*/true);
    CHECK(reader.next().has_value());
    CHECK_THROWS_AS(reader.next(), IngestError);
}

TEST_CASE("missing file is an ingest error") {
    CHECK_THROWS_AS(ReportReader("/nonexistent/corpus.jsonl", false), IngestError);
}

TEST_CASE("corpus_stats counts reports, engines, and labels") {
    TempDir dir;

    SUBCASE("empty stream") {
        auto path = write_file(dir.file("empty.jsonl"), "");
        ReportReader reader(path, false);
        CorpusStats stats = corpus_stats(reader);
        CHECK(stats.report_count == 0);
        CHECK(stats.engine_counts.empty());
        CHECK(stats.label_count == 0);
    }

    SUBCASE("two reports, one engine each") {
        std::string text = "{\"sha256\":\"" + sha(1) + "\",\"scans\":{\"EngA\":\"X.y\"}}\n" +
                           "{\"sha256\":\"" + sha(2) + "\",\"scans\":{\"EngA\":\"X.z\"}}\n";
        ReportReader reader(write_file(dir.file("two.jsonl"), text), false);
        CorpusStats stats = corpus_stats(reader);
        CHECK(stats.report_count == 2);
        CHECK(stats.engine_counts.at("enga") == 2);
        CHECK(stats.label_count == 2);
    }

    SUBCASE("one report, two engines") {
        std::string text =
            "{\"sha256\":\"" + sha(1) + "\",\"scans\":{\"EngA\":\"X.y\",\"EngB\":\"X.z\"}}\n";
        ReportReader reader(write_file(dir.file("one.jsonl"), text), false);
        CorpusStats stats = corpus_stats(reader);
        CHECK(stats.report_count == 1);
        CHECK(stats.label_count == 2);
        std::uint64_t sum = 0;
        for (const auto& [engine, n] : stats.engine_counts) sum += n;
        CHECK(sum == stats.label_count);
    }
}

TEST_CASE("ingestion is deterministic") {
    TempDir dir;
    std::string text;
    for (int i = 0; i < 50; ++i) {
        text += "{\"sha256\":\"" + sha(static_cast<unsigned>(i)) +
                "\",\"scans\":{\"a\":\"L" + std::to_string(i) + ".x\"},\"chunk\":" + std::to_string(i) + "}\n";
    }
    auto path = write_file(dir.file("det.jsonl"), text);
    auto run = [&] {
        ReportReader reader(path, true);
        std::string digest;
        while (auto report = reader.next()) {
            digest += report->file_id;
            digest += '|';
            for (const auto& d : report->detections) digest += d.engine + '=' + d.label + ';';
        }
        return digest;
    };
    CHECK(run() == run());
}
