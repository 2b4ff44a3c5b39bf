#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include "avtag/scan_report.hpp"

namespace avtag {

/// Called for every record skipped in non-strict mode.
using IngestDiagnostic = std::function<void(std::uint64_t line_number, const std::string& reason)>;

/// Writes "line N: reason" to stderr.
void default_ingest_diagnostic(std::uint64_t line_number, const std::string& reason);

/// Parses one scan-report line. Returns nullopt and fills `reason` when the
/// record is malformed. Never throws; the caller decides strictness.
std::optional<ScanReport> parse_report_line(std::string_view line, std::string& reason);

/// Streaming reader over a scan report file: one record per line, UTF-8,
/// required keys "sha256" and "scans", optional "scan_time" and "chunk",
/// unknown keys ignored. Holds one record at a time.
class ReportReader {
  public:
    ReportReader(const std::filesystem::path& path, bool strict,
                 IngestDiagnostic diagnostic = default_ingest_diagnostic);

    /// Next valid report, or nullopt at end of file. Malformed lines are
    /// skipped with a diagnostic, or throw IngestError in strict mode.
    std::optional<ScanReport> next();

    /// Next raw line with its 1-based line number (for parallel pipelines
    /// that parse off-thread). Blank lines are skipped.
    std::optional<std::pair<std::string, std::uint64_t>> next_line();

    std::uint64_t lines_read() const { return line_number_; }
    std::uint64_t records_skipped() const { return skipped_; }

  private:
    std::ifstream in_;
    std::filesystem::path path_;
    bool strict_;
    IngestDiagnostic diagnostic_;
    std::uint64_t line_number_ = 0;
    std::uint64_t skipped_ = 0;
};

/// Drains the reader and counts reports, per-engine detections, and labels.
CorpusStats corpus_stats(ReportReader& reader);

}  // namespace avtag
