#include "delayptc/afc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

using namespace delayptc;

namespace {

AfcRecord rec(const std::string& card, const std::string& ts, TxnType type, const std::string& where) {
    return {card, *parse_compact_timestamp(ts), type, type == TxnType::Bus ? "Bus Group" : "Line 1", where};
}

struct OracleResult {
    std::vector<Trip> trips;
    std::map<AnomalyKind, std::size_t> counts;
};

// Group by card, order each card's metro taps by time (entries first on ties),
// then walk pairs: an entry immediately followed by an exit is a trip candidate.
OracleResult group_then_scan(const std::vector<AfcRecord>& records, double max_minutes) {
    std::map<std::string, std::vector<AfcRecord>> by_card;
    for (const auto& r : records)
        if (is_metro(r.type)) by_card[r.card_id].push_back(r);
    OracleResult out;
    for (auto& [card, taps] : by_card) {
        std::stable_sort(taps.begin(), taps.end(), [](const AfcRecord& a, const AfcRecord& b) {
            return std::tie(a.timestamp, a.type, a.location) < std::tie(b.timestamp, b.type, b.location);
        });
        std::size_t i = 0;
        while (i < taps.size()) {
            if (taps[i].type == TxnType::MetroExit) {
                ++out.counts[AnomalyKind::UnmatchedExit];
                ++i;
            } else if (i + 1 == taps.size() || taps[i + 1].type == TxnType::MetroEntry) {
                ++out.counts[AnomalyKind::UnmatchedEntry];
                ++i;
            } else {
                Trip t{card, taps[i].location, taps[i].timestamp, taps[i + 1].location, taps[i + 1].timestamp,
                       taps[i].location == taps[i + 1].location};
                auto minutes = t.duration_minutes();
                if (minutes <= 0) ++out.counts[AnomalyKind::NonPositiveDuration];
                else if (minutes > max_minutes) ++out.counts[AnomalyKind::OverlongTrip];
                else {
                    if (t.same_station) ++out.counts[AnomalyKind::SameStationExit];
                    out.trips.push_back(t);
                }
                i += 2;
            }
        }
    }
    return out;
}

}  // namespace

TEST(AfcParse, AcceptsValidRowsAndSkipsHeader) {
    auto text =
        "ID\tTransaction Date and Time\tTransaction Type\tCompany\tLine/Station\n"
        "300000001\t20190801074500\tMetro (Entry)\tLine 1\tLuohu\n"
        "\n"
        "300000001\t20190801081000\tMetro (Exit)\tLine 1\tGuomao\n"
        "300000001\t20190801181000\tBus QR Code\tEastern Bus\tM190\n";
    auto r = parse_afc_text(text);
    EXPECT_EQ(r.report.input_rows, 3u);
    EXPECT_EQ(r.report.accepted, 3u);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.records[2].type, TxnType::BusQr);
    EXPECT_EQ(format_afc(r.records), std::string(text).erase(std::string(text).find("\n\n"), 1));
}

TEST(AfcParse, RejectsAreReportedNotFatal) {
    auto text =
        "300000001\t20190801074500\tMetro (Entry)\tLine 1\tLuohu\n"
        "300000001\t2019080107450\tMetro (Entry)\tLine 1\tLuohu\n"
        "300000001\t20190801074500\tTram\tLine 1\tLuohu\n"
        "\t20190801074500\tMetro (Entry)\tLine 1\tLuohu\n"
        "300000001\t20190801074500\tMetro (Entry)\n"
        "300000001\t20190803074500\tMetro (Entry)\tLine 1\tLuohu\n";
    Calendar cal;
    cal.set(*parse_date("2019-08-01"), "weekday");
    cal.set(*parse_date("2019-08-03"), "weekend");
    auto r = parse_afc_text(text, {&cal});
    EXPECT_EQ(r.report.input_rows, 6u);
    EXPECT_EQ(r.report.accepted, 1u);
    std::vector<std::string> reasons;
    for (const auto& x : r.report.rejected) reasons.push_back(x.reason);
    EXPECT_EQ(reasons, (std::vector<std::string>{"malformed-timestamp", "unknown-txn-type", "empty-card-id",
                                                 "malformed-row", "non-weekday"}));
    EXPECT_EQ(r.report.rejected.front().line_number, 2u);
}

TEST(Calendar, UnlistedDatesAreNotWeekdays) {
    auto cal = Calendar::parse("2019-08-01\tweekday\n2019-08-02\tholiday\n");
    EXPECT_TRUE(cal.is_weekday(*parse_date("2019-08-01")));
    EXPECT_FALSE(cal.is_weekday(*parse_date("2019-08-02")));
    EXPECT_FALSE(cal.is_weekday(*parse_date("2019-08-05")));
    EXPECT_EQ(cal.weekday_count(), 1u);
    EXPECT_EQ(Calendar::parse(cal.to_text()).to_text(), cal.to_text());
}

TEST(Reconstruct, HandlesEveryAnomalyKind) {
    std::vector<AfcRecord> records = {
        rec("A", "20190801080000", TxnType::MetroEntry, "Luohu"),
        rec("A", "20190801083000", TxnType::MetroExit, "Guomao"),
        rec("A", "20190801090000", TxnType::MetroExit, "Laojie"),       // unmatched exit
        rec("A", "20190801100000", TxnType::MetroEntry, "Guomao"),      // unmatched entry
        rec("A", "20190801110000", TxnType::MetroEntry, "Guomao"),
        rec("A", "20190801111000", TxnType::MetroExit, "Guomao"),       // same station
        rec("A", "20190801120000", TxnType::Bus, "10"),
        rec("B", "20190801060000", TxnType::MetroEntry, "Luohu"),
        rec("B", "20190801110000", TxnType::MetroExit, "Guomao"),       // overlong
    };
    std::reverse(records.begin(), records.end());
    auto r = reconstruct_trips(records);
    ASSERT_EQ(r.trips.size(), 2u);
    EXPECT_EQ(r.trips[0].dest, "Guomao");
    EXPECT_DOUBLE_EQ(r.trips[0].duration_minutes(), 30.0);
    EXPECT_TRUE(r.trips[1].same_station);
    std::map<AnomalyKind, int> kinds;
    for (const auto& a : r.anomalies) ++kinds[a.kind];
    EXPECT_EQ(kinds[AnomalyKind::UnmatchedExit], 1);
    EXPECT_EQ(kinds[AnomalyKind::UnmatchedEntry], 1);
    EXPECT_EQ(kinds[AnomalyKind::SameStationExit], 1);
    EXPECT_EQ(kinds[AnomalyKind::OverlongTrip], 1);
}

TEST(Reconstruct, MatchesGroupThenScanOracle) {
    const std::vector<std::string> stations = {"Luohu", "Guomao", "Laojie", "Xili"};
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        std::vector<AfcRecord> records;
        for (int card = 0; card < 12; ++card) {
            auto n = rng.uniform_int(0, 14);
            for (int k = 0; k < n; ++k) {
                auto secs = static_cast<int>(rng.uniform_int(5 * 3600, 23 * 3600));
                auto kind = rng.uniform_int(0, 9);
                auto type = kind < 5 ? TxnType::MetroEntry : kind < 9 ? TxnType::MetroExit : TxnType::Bus;
                auto where = stations[static_cast<std::size_t>(rng.uniform_int(0, 3))];
                records.push_back({"C" + std::to_string(card), make_timestamp(*parse_date("2019-08-01"), secs), type,
                                   "op", where});
            }
        }
        rng.shuffle(records);
        auto got = reconstruct_trips(records, {120.0});
        auto want = group_then_scan(records, 120.0);
        ASSERT_EQ(got.trips, want.trips) << "seed " << seed;
        std::map<AnomalyKind, std::size_t> counts;
        std::size_t consumed = 2 * got.trips.size();
        for (const auto& a : got.anomalies) {
            ++counts[a.kind];
            consumed += a.records.size();
        }
        ASSERT_EQ(counts, want.counts) << "seed " << seed;
        auto metro = std::count_if(records.begin(), records.end(), [](const AfcRecord& r) { return is_metro(r.type); });
        ASSERT_EQ(consumed, static_cast<std::size_t>(metro));
    }
}

TEST(Reconstruct, TripsRoundTripThroughText) {
    std::vector<AfcRecord> records = {rec("A", "20190801080000", TxnType::MetroEntry, "Luohu"),
                                      rec("A", "20190801083012", TxnType::MetroExit, "Bao'an Center")};
    auto trips = reconstruct_trips(records).trips;
    auto text = format_trips(trips);
    EXPECT_EQ(parse_trips(text), trips);
    EXPECT_EQ(format_trips(parse_trips(text)), text);
}
