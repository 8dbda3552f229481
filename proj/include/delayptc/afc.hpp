#pragma once

#include "delayptc/common.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

enum class TxnType { MetroEntry, MetroExit, Bus, BusQr };

/// Source spellings: "Metro (Entry)", "Metro (Exit)", "Bus", "Bus QR Code".
std::string_view to_source_string(TxnType type);
std::optional<TxnType> parse_txn_type(std::string_view text);
inline bool is_metro(TxnType t) { return t == TxnType::MetroEntry || t == TxnType::MetroExit; }

struct AfcRecord {
    std::string card_id;
    Timestamp timestamp;
    TxnType type = TxnType::MetroEntry;
    std::string op;        // operating company or line hint
    std::string location;  // station name or bus route

    auto operator<=>(const AfcRecord&) const = default;
};

/// Dates tagged "weekday" are analysed; anything else (or unlisted) is not.
class Calendar {
public:
    static Calendar parse(std::string_view text);
    static Calendar load(const std::filesystem::path& path);

    void set(Date date, std::string tag) { tags_[date] = std::move(tag); }
    bool is_weekday(Date date) const;
    std::size_t weekday_count() const;
    std::string to_text() const;

private:
    std::map<Date, std::string> tags_;
};

struct RejectedRow {
    std::size_t line_number = 0;  // 1-based physical line in the source
    std::string reason;           // malformed-row, malformed-timestamp, unknown-txn-type, empty-card-id, non-weekday
    std::string raw;
};

struct IngestReport {
    std::size_t input_rows = 0;
    std::size_t accepted = 0;
    std::vector<RejectedRow> rejected;
};

struct ParseOptions {
    const Calendar* calendar = nullptr;  // weekday filter applies when set
};

struct ParseResult {
    std::vector<AfcRecord> records;
    IngestReport report;
};

/// Parses 5-column AFC rows. Blank lines and a leading "ID" header row are not
/// counted as input rows; malformed rows are rejected, never fatal.
ParseResult parse_afc(std::istream& source, const ParseOptions& options = {});
ParseResult parse_afc_text(std::string_view text, const ParseOptions& options = {});
std::string format_afc(const std::vector<AfcRecord>& records);

struct Trip {
    std::string card_id;
    std::string origin;
    Timestamp entry_time;
    std::string dest;
    Timestamp exit_time;
    bool same_station = false;

    double duration_minutes() const { return static_cast<double>((exit_time - entry_time).count()) / 60.0; }
    auto operator<=>(const Trip&) const = default;
};

enum class AnomalyKind { UnmatchedEntry, UnmatchedExit, OverlongTrip, NonPositiveDuration, SameStationExit };
std::string_view to_string(AnomalyKind kind);

struct Anomaly {
    AnomalyKind kind;
    std::string card_id;
    /// Metro records consumed by this anomaly. Same-station exits keep their
    /// records inside the flagged trip, so this is empty for them.
    std::vector<AfcRecord> records;
};

struct ReconstructParams {
    double max_trip_duration = 240.0;  // minutes
};

struct ReconstructResult {
    std::vector<Trip> trips;  // ordered by (card_id, entry_time)
    std::vector<Anomaly> anomalies;
};

/// Pairs each MetroEntry with the next MetroExit of the same card. Bus records
/// are ignored. Input order does not matter.
ReconstructResult reconstruct_trips(std::vector<AfcRecord> records, const ReconstructParams& params = {});

std::string format_trips(const std::vector<Trip>& trips);
std::vector<Trip> parse_trips(std::string_view text);

}  // namespace delayptc
