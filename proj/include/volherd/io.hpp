#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace volherd {

// One row of the event stream. Merge-only steps (recorded under an
// all-steps policy) carry traded=false and zeroed V/N/Q/r.
struct EventRecord {
    uint64_t t = 0;
    bool traded = false;
    double V = 0.0;
    uint32_t N = 0;
    double Q = 0.0;
    double r = 0.0;

    bool operator==(const EventRecord&) const = default;
};

// Append-oriented writer for the events text file: one row per line,
// "t traded V N Q r", after a fixed schema header. Doubles go through
// std::to_chars, the shortest form that parses back bit-identically --
// re-running analysis from disk must reproduce the in-memory fits
// exactly, so lossy formatting is off the table.
class EventWriter {
  public:
    // Fresh stream: truncates and writes the schema header.
    explicit EventWriter(const std::filesystem::path& file);
    // Resume: truncates to resume_offset (a byte_offset() observed after
    // a whole row) and appends from there. Throws if the file is shorter.
    EventWriter(const std::filesystem::path& file, uint64_t resume_offset);

    void append(const EventRecord& rec);
    void flush();

    // Bytes written through the last complete row; valid resume target.
    uint64_t byte_offset() const { return offset_; }

  private:
    std::ofstream out_;
    uint64_t offset_ = 0;
};

// Reads a complete events file (header validated, every row parsed with
// std::from_chars). Malformed input throws std::runtime_error.
std::vector<EventRecord> read_events(const std::filesystem::path& file);

// Two-column delimited text (x y per line) under a single '#' header
// line; the plot-ready export format for histograms and ACFs.
void write_xy(const std::filesystem::path& file, std::string_view header,
              std::span<const double> x, std::span<const double> y);

// "key = value" lines in the given order (fit reports, summaries).
void write_keyvalue(
    const std::filesystem::path& file,
    const std::vector<std::pair<std::string, std::string>>& rows);

// Whole-file helpers for small artifacts (markers, metadata JSON).
void write_text_file(const std::filesystem::path& file,
                     std::string_view content);
std::string read_text_file(const std::filesystem::path& file);

// Resume state for an interrupted measurement: everything needed to pick
// the run back up -- identity of the producing run (JSON blob, compared
// verbatim on resume), progress counters, the byte offset of the last
// durable event row, and the full market snapshot. Written atomically
// (temp file + rename) so a crash mid-checkpoint leaves the previous one
// intact.
struct Checkpoint {
    std::string identity_json;
    uint64_t measure_done = 0;
    uint64_t events_offset = 0;
    std::string market_blob;

    bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace volherd
