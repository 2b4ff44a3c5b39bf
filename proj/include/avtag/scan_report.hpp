#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avtag {

/// One engine's detection for a file.
struct Detection {
    std::string engine;  ///< normalized: lowercased, whitespace-trimmed
    std::string label;   ///< raw AV label, whitespace-trimmed, non-empty
};

/// One file's scan results across many AV engines.
///
/// Invariants: file_id is 64 lowercase hex chars; at most one detection per
/// engine (first wins); labels are non-empty after trimming.
struct ScanReport {
    std::string file_id;
    std::vector<Detection> detections;   // in input order
    std::optional<std::string> scan_time;
    std::optional<std::uint32_t> source_chunk;
};

/// Corpus-level counts gathered in a single pass.
struct CorpusStats {
    std::uint64_t report_count = 0;
    std::map<std::string, std::uint64_t> engine_counts;
    std::uint64_t label_count = 0;

    void add(const ScanReport& report) {
        ++report_count;
        for (const auto& d : report.detections) {
            ++engine_counts[d.engine];
            ++label_count;
        }
    }
};

}  // namespace avtag
