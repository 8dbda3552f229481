#include "delayptc/afc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

namespace delayptc {

std::string_view to_source_string(TxnType type) {
    switch (type) {
    case TxnType::MetroEntry: return "Metro (Entry)";
    case TxnType::MetroExit: return "Metro (Exit)";
    case TxnType::Bus: return "Bus";
    case TxnType::BusQr: return "Bus QR Code";
    }
    return "";
}

std::optional<TxnType> parse_txn_type(std::string_view text) {
    for (auto t : {TxnType::MetroEntry, TxnType::MetroExit, TxnType::Bus, TxnType::BusQr})
        if (text == to_source_string(t)) return t;
    return std::nullopt;
}

Calendar Calendar::parse(std::string_view text) {
    Calendar cal;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ss(line);
        std::string date_text, tag;
        ss >> date_text >> tag;
        auto date = parse_date(date_text);
        if (!date || tag.empty())
            throw Error("malformed-calendar", fmt::format("line {}: '{}'", line_no, line));
        cal.set(*date, to_lower(tag));
    }
    return cal;
}

Calendar Calendar::load(const std::filesystem::path& path) { return parse(read_file(path)); }

bool Calendar::is_weekday(Date date) const {
    auto it = tags_.find(date);
    return it != tags_.end() && it->second == "weekday";
}

std::size_t Calendar::weekday_count() const {
    return static_cast<std::size_t>(
        std::count_if(tags_.begin(), tags_.end(), [](const auto& kv) { return kv.second == "weekday"; }));
}

std::string Calendar::to_text() const {
    std::string out;
    for (const auto& [date, tag] : tags_) out += format_date(date) + "\t" + tag + "\n";
    return out;
}

ParseResult parse_afc(std::istream& source, const ParseOptions& options) {
    if (!source) throw Error("unreadable-source", "AFC stream is not readable");
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_row(line);
        if (first_content) {
            first_content = false;
            if (!fields.empty() && fields[0] == "ID") continue;
        }
        ++result.report.input_rows;
        auto reject = [&](std::string reason) {
            result.report.rejected.push_back({line_no, std::move(reason), line});
        };
        if (fields.size() != 5) {
            reject("malformed-row");
            continue;
        }
        if (fields[0].empty()) {
            reject("empty-card-id");
            continue;
        }
        auto ts = parse_compact_timestamp(fields[1]);
        if (!ts) {
            reject("malformed-timestamp");
            continue;
        }
        auto type = parse_txn_type(fields[2]);
        if (!type) {
            reject("unknown-txn-type");
            continue;
        }
        if (fields[4].empty()) {
            reject("malformed-row");
            continue;
        }
        if (options.calendar && !options.calendar->is_weekday(date_of(*ts))) {
            reject("non-weekday");
            continue;
        }
        result.records.push_back({fields[0], *ts, *type, fields[3], fields[4]});
        ++result.report.accepted;
    }
    if (source.bad()) throw Error("unreadable-source", "read error in AFC stream");
    return result;
}

ParseResult parse_afc_text(std::string_view text, const ParseOptions& options) {
    std::istringstream ss{std::string(text)};
    return parse_afc(ss, options);
}

std::string format_afc(const std::vector<AfcRecord>& records) {
    std::string out = "ID\tTransaction Date and Time\tTransaction Type\tCompany\tLine/Station\n";
    for (const auto& r : records)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.card_id, format_compact_timestamp(r.timestamp),
                           to_source_string(r.type), r.op, r.location);
    return out;
}

std::string_view to_string(AnomalyKind kind) {
    switch (kind) {
    case AnomalyKind::UnmatchedEntry: return "unmatched-entry";
    case AnomalyKind::UnmatchedExit: return "unmatched-exit";
    case AnomalyKind::OverlongTrip: return "over-long-trip";
    case AnomalyKind::NonPositiveDuration: return "non-positive-duration";
    case AnomalyKind::SameStationExit: return "same-station-exit";
    }
    return "";
}

ReconstructResult reconstruct_trips(std::vector<AfcRecord> records, const ReconstructParams& params) {
    std::erase_if(records, [](const AfcRecord& r) { return !is_metro(r.type); });
    // Entries sort before exits at the same second; the full key makes the
    // result independent of input order.
    std::sort(records.begin(), records.end(), [](const AfcRecord& a, const AfcRecord& b) {
        return std::tie(a.card_id, a.timestamp, a.type, a.location, a.op) <
               std::tie(b.card_id, b.timestamp, b.type, b.location, b.op);
    });

    ReconstructResult out;
    const AfcRecord* pending = nullptr;
    auto flush_pending = [&] {
        if (pending) out.anomalies.push_back({AnomalyKind::UnmatchedEntry, pending->card_id, {*pending}});
        pending = nullptr;
    };
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (pending && pending->card_id != r.card_id) flush_pending();
        if (r.type == TxnType::MetroEntry) {
            flush_pending();
            pending = &r;
            continue;
        }
        if (!pending) {
            out.anomalies.push_back({AnomalyKind::UnmatchedExit, r.card_id, {r}});
            continue;
        }
        Trip trip{r.card_id, pending->location, pending->timestamp, r.location, r.timestamp,
                  pending->location == r.location};
        double duration = trip.duration_minutes();
        if (duration <= 0) {
            out.anomalies.push_back({AnomalyKind::NonPositiveDuration, r.card_id, {*pending, r}});
        } else if (duration > params.max_trip_duration) {
            out.anomalies.push_back({AnomalyKind::OverlongTrip, r.card_id, {*pending, r}});
        } else {
            if (trip.same_station) out.anomalies.push_back({AnomalyKind::SameStationExit, r.card_id, {}});
            out.trips.push_back(std::move(trip));
        }
        pending = nullptr;
    }
    flush_pending();
    return out;
}

std::string format_trips(const std::vector<Trip>& trips) {
    std::string out = "card_id\torigin\tentry_time\tdest\texit_time\tduration_min\tsame_station\n";
    for (const auto& t : trips)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", t.card_id, t.origin, format_iso_timestamp(t.entry_time),
                           t.dest, format_iso_timestamp(t.exit_time), format_decimal(t.duration_minutes(), 2),
                           t.same_station ? "true" : "false");
    return out;
}

std::vector<Trip> parse_trips(std::string_view text) {
    std::vector<Trip> trips;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 7) throw Error("malformed-trip-file", fmt::format("line {}", line_no));
        auto entry = parse_iso_timestamp(f[2]);
        auto exit = parse_iso_timestamp(f[4]);
        if (!entry || !exit) throw Error("malformed-trip-file", fmt::format("line {}: bad timestamp", line_no));
        trips.push_back({f[0], f[1], *entry, f[3], *exit, f[6] == "true"});
    }
    return trips;
}

}  // namespace delayptc
