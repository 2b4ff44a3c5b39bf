#include "avtag/scan_ingest.hpp"

#include <iostream>
#include <limits>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "avtag/errors.hpp"
#include "avtag/util.hpp"

namespace avtag {
namespace {

using nlohmann::json;

/// SAX handler for one scan-report record. Streaming keeps duplicate-key
/// control (first engine entry wins; a DOM parse would keep the last) and
/// avoids materializing values of unknown keys.
class ReportSax {
  public:
    using number_integer_t = json::number_integer_t;
    using number_unsigned_t = json::number_unsigned_t;
    using number_float_t = json::number_float_t;
    using string_t = json::string_t;
    using binary_t = json::binary_t;

    ScanReport report;
    bool complete = false;
    std::string reason;

    bool null() { return scalar(); }
    bool boolean(bool) { return scalar(); }

    bool number_integer(number_integer_t value) {
        if (state_ == State::RootValue && key_ == Key::Chunk) {
            if (value < 0) return fail("chunk is negative");
            return chunk_value(static_cast<std::uint64_t>(value));
        }
        return scalar();
    }

    bool number_unsigned(number_unsigned_t value) {
        if (state_ == State::RootValue && key_ == Key::Chunk) return chunk_value(value);
        return scalar();
    }

    bool number_float(number_float_t, const string_t&) { return scalar(); }
    bool binary(binary_t&) { return scalar(); }

    bool string(string_t& value) {
        if (state_ == State::RootValue) {
            state_ = State::Root;
            switch (key_) {
                case Key::Sha:
                    report.file_id = to_lower(value);
                    return true;
                case Key::ScanTime:
                    report.scan_time = std::string(value);
                    return true;
                case Key::Chunk:
                    return fail("chunk is not an integer");
                case Key::Scans:
                    return fail("scans is not an object");
            }
            return true;
        }
        if (state_ == State::ScanValue) {
            state_ = State::Scans;
            if (!engines_seen_.insert(engine_).second) return true;  // first entry wins
            std::string label{trim(value)};
            if (!label.empty()) report.detections.push_back({std::move(engine_), std::move(label)});
            return true;
        }
        return scalar();
    }

    bool start_object(std::size_t) {
        switch (state_) {
            case State::Start:
                state_ = State::Root;
                return true;
            case State::RootValue:
                if (key_ == Key::Scans) {
                    state_ = State::Scans;
                    return true;
                }
                return fail(bad_value_type());
            case State::ScanValue:
                return fail("scan label is not a string");
            case State::Skip:
                ++skip_nest_;
                return true;
            default:
                return fail("unexpected object");
        }
    }

    bool key(string_t& name) {
        if (state_ == State::Root) {
            if (name == "sha256" && !seen_sha_) {
                seen_sha_ = true;
                key_ = Key::Sha;
            } else if (name == "scans" && !seen_scans_) {
                seen_scans_ = true;
                key_ = Key::Scans;
            } else if (name == "scan_time" && !seen_time_) {
                seen_time_ = true;
                key_ = Key::ScanTime;
            } else if (name == "chunk" && !seen_chunk_) {
                seen_chunk_ = true;
                key_ = Key::Chunk;
            } else {
                state_ = State::Skip;  // unknown or repeated key: value discarded
                skip_nest_ = 0;
                return true;
            }
            state_ = State::RootValue;
            return true;
        }
        if (state_ == State::Scans) {
            engine_ = to_lower(trim(name));
            if (engine_.empty()) return fail("empty engine name");
            state_ = State::ScanValue;
            return true;
        }
        return true;  // key inside a skipped container
    }

    bool end_object() {
        switch (state_) {
            case State::Root:
                state_ = State::Start;
                return finish();
            case State::Scans:
                state_ = State::Root;
                return true;
            case State::Skip:
                if (--skip_nest_ == 0) state_ = State::Root;
                return true;
            default:
                return fail("unexpected end of object");
        }
    }

    bool start_array(std::size_t) {
        switch (state_) {
            case State::Start:
                return fail("record is not a JSON object");
            case State::RootValue:
                return fail(bad_value_type());
            case State::ScanValue:
                return fail("scan label is not a string");
            case State::Skip:
                ++skip_nest_;
                return true;
            default:
                return fail("unexpected array");
        }
    }

    bool end_array() {
        if (state_ == State::Skip) {
            if (--skip_nest_ == 0) state_ = State::Root;
            return true;
        }
        return fail("unexpected end of array");
    }

    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) {
        complete = false;
        reason = "invalid JSON";
        return false;
    }

  private:
    enum class State { Start, Root, RootValue, Scans, ScanValue, Skip };
    enum class Key { Sha, Scans, ScanTime, Chunk };

    bool fail(std::string why) {
        reason = std::move(why);
        return false;
    }

    /// Scalar in a context where no known field expects one.
    bool scalar() {
        switch (state_) {
            case State::Skip:
                if (skip_nest_ == 0) state_ = State::Root;
                return true;
            case State::Start:
                return fail("record is not a JSON object");
            case State::RootValue:
                return fail(bad_value_type());
            case State::ScanValue:
                return fail("scan label is not a string");
            default:
                return fail("unexpected value");
        }
    }

    bool chunk_value(std::uint64_t value) {
        if (value > std::numeric_limits<std::uint32_t>::max()) return fail("chunk out of range");
        report.source_chunk = static_cast<std::uint32_t>(value);
        state_ = State::Root;
        return true;
    }

    const char* bad_value_type() const {
        switch (key_) {
            case Key::Sha: return "sha256 is not a string";
            case Key::Scans: return "scans is not an object";
            case Key::ScanTime: return "scan_time is not a string";
            case Key::Chunk: return "chunk is not an integer";
        }
        return "unexpected value";
    }

    bool finish() {
        if (!seen_sha_) return fail("missing sha256");
        if (!is_lower_hex64(report.file_id)) return fail("invalid sha256");
        if (!seen_scans_) return fail("missing scans");
        complete = true;
        return true;
    }

    State state_ = State::Start;
    Key key_ = Key::Sha;
    std::size_t skip_nest_ = 0;
    bool seen_sha_ = false;
    bool seen_scans_ = false;
    bool seen_time_ = false;
    bool seen_chunk_ = false;
    std::string engine_;
    std::unordered_set<std::string> engines_seen_;
};

}  // namespace

void default_ingest_diagnostic(std::uint64_t line_number, const std::string& reason) {
    std::cerr << "line " << line_number << ": " << reason << '\n';
}

std::optional<ScanReport> parse_report_line(std::string_view line, std::string& reason) {
    ReportSax handler;
    const bool ok = json::sax_parse(line.begin(), line.end(), &handler);
    if (!ok || !handler.complete) {
        reason = handler.reason.empty() ? "invalid JSON" : handler.reason;
        return std::nullopt;
    }
    return std::move(handler.report);
}

ReportReader::ReportReader(const std::filesystem::path& path, bool strict, IngestDiagnostic diagnostic)
    : in_(path), path_(path), strict_(strict), diagnostic_(std::move(diagnostic)) {
    if (!in_) throw IngestError("cannot open " + path.string());
}

std::optional<std::pair<std::string, std::uint64_t>> ReportReader::next_line() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_number_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        return std::make_pair(std::move(line), line_number_);
    }
    return std::nullopt;
}

std::optional<ScanReport> ReportReader::next() {
    while (auto item = next_line()) {
        std::string reason;
        if (auto report = parse_report_line(item->first, reason)) return report;
        if (strict_) {
            throw IngestError(path_.string() + " line " + std::to_string(item->second) + ": " + reason);
        }
        ++skipped_;
        if (diagnostic_) diagnostic_(item->second, reason);
    }
    return std::nullopt;
}

CorpusStats corpus_stats(ReportReader& reader) {
    CorpusStats stats;
    while (auto report = reader.next()) stats.add(*report);
    return stats;
}

}  // namespace avtag
