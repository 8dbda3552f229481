#include "delayptc/patterns.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

namespace delayptc {

std::vector<ScreenedCard> screen_regulars(const std::vector<Trip>& trips, const ScreenParams& params) {
    std::map<std::string, std::set<Date>> days;
    std::map<std::string, std::map<OdPair, std::set<Date>>> od_days;
    for (const auto& t : trips) {
        if (t.same_station) continue;
        auto d = date_of(t.entry_time);
        days[t.card_id].insert(d);
        od_days[t.card_id][{t.origin, t.dest}].insert(d);
    }
    std::vector<ScreenedCard> out;
    for (const auto& [card, card_days] : days) {
        if (card_days.size() < params.day_threshold) continue;
        ScreenedCard sc{card, card_days.size(), {}};
        bool consistent = false;
        for (const auto& [od, d] : od_days[card]) {
            sc.od_days[od] = d.size();
            consistent = consistent || d.size() >= params.od_day_threshold;
        }
        if (consistent) out.push_back(std::move(sc));
    }
    return out;
}

std::vector<std::vector<double>> gap_clusters(std::vector<double> values, double eps) {
    std::sort(values.begin(), values.end());
    std::vector<std::vector<double>> clusters;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i == 0 || values[i] - values[i - 1] > eps) clusters.emplace_back();
        clusters.back().push_back(values[i]);
    }
    return clusters;
}

std::vector<TravelPattern> mine_patterns(const std::vector<Trip>& card_trips, const ClusterParams& params) {
    std::map<OdPair, std::vector<const Trip*>> by_od;
    for (const auto& t : card_trips)
        if (!t.same_station) by_od[{t.origin, t.dest}].push_back(&t);

    std::vector<TravelPattern> out;
    for (auto& [od, group] : by_od) {
        std::sort(group.begin(), group.end(), [](const Trip* a, const Trip* b) {
            return std::tie(a->entry_time, a->exit_time) < std::tie(b->entry_time, b->exit_time);
        });
        // Sort by minute of day; ties keep chronological order.
        std::stable_sort(group.begin(), group.end(), [](const Trip* a, const Trip* b) {
            return minute_of_day(a->entry_time) < minute_of_day(b->entry_time);
        });
        std::size_t begin = 0;
        for (std::size_t i = 1; i <= group.size(); ++i) {
            bool cut = i == group.size() ||
                       minute_of_day(group[i]->entry_time) - minute_of_day(group[i - 1]->entry_time) >
                           params.eps_minutes;
            if (!cut) continue;
            std::size_t n = i - begin;
            if (n >= params.min_pts) {
                std::vector<double> entries, durations;
                std::set<Date> days;
                for (std::size_t k = begin; k < i; ++k) {
                    entries.push_back(minute_of_day(group[k]->entry_time));
                    durations.push_back(group[k]->duration_minutes());
                    days.insert(date_of(group[k]->entry_time));
                }
                auto stats = mean_and_population_std(entries);
                TravelPattern p;
                p.card_id = group[begin]->card_id;
                p.origin = od.first;
                p.dest = od.second;
                p.entry_mean = stats.mean;
                p.entry_std = stats.std;
                p.mean_duration = mean_and_population_std(durations).mean;
                p.trip_count = n;
                p.day_count = days.size();
                out.push_back(std::move(p));
            }
            begin = i;
        }
    }
    // by_od iteration is already (origin, dest) ordered and clusters ascend in time.
    for (std::size_t k = 0; k < out.size(); ++k) out[k].key = fmt::format("{}#{}", out[k].card_id, k);
    return out;
}

std::vector<RegularPassenger> mine_regulars(const std::vector<Trip>& trips, const MiningParams& params) {
    auto screened = screen_regulars(trips, params.screen);
    std::map<std::string, std::vector<Trip>> by_card;
    for (const auto& s : screened) by_card[s.card_id];
    for (const auto& t : trips) {
        auto it = by_card.find(t.card_id);
        if (it == by_card.end() || params.excluded_dates.count(date_of(t.entry_time))) continue;
        it->second.push_back(t);
    }
    std::vector<RegularPassenger> out;
    for (const auto& s : screened) {
        auto patterns = mine_patterns(by_card[s.card_id], params.cluster);
        if (patterns.empty()) continue;
        out.push_back({s.card_id, s.travel_days, std::move(patterns)});
    }
    return out;
}

std::string format_patterns(const std::vector<TravelPattern>& patterns) {
    std::string out =
        "pattern_key\tcard_id\torigin\tdest\tentry_mean\tentry_std\tmean_duration\ttrip_count\tday_count\n";
    // Full round-trip precision: downstream stages recompute predicates from these values.
    for (const auto& p : patterns)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.key, p.card_id, p.origin, p.dest, p.entry_mean,
                           p.entry_std, p.mean_duration, p.trip_count, p.day_count);
    return out;
}

namespace {

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error("malformed-pattern-file", fmt::format("line {}: '{}'", line_no, s));
    return value;
}

}  // namespace

std::vector<TravelPattern> parse_patterns(std::string_view text) {
    std::vector<TravelPattern> out;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 9) throw Error("malformed-pattern-file", fmt::format("line {}", line_no));
        TravelPattern p;
        p.key = f[0];
        p.card_id = f[1];
        p.origin = f[2];
        p.dest = f[3];
        p.entry_mean = parse_number<double>(f[4], line_no);
        p.entry_std = parse_number<double>(f[5], line_no);
        p.mean_duration = parse_number<double>(f[6], line_no);
        p.trip_count = parse_number<std::size_t>(f[7], line_no);
        p.day_count = parse_number<std::size_t>(f[8], line_no);
        out.push_back(std::move(p));
    }
    return out;
}

std::string format_regulars(const std::vector<RegularPassenger>& regulars) {
    std::string out = "card_id\ttravel_days\tpattern_count\n";
    for (const auto& r : regulars)
        out += fmt::format("{}\t{}\t{}\n", r.card_id, r.travel_day_count, r.patterns.size());
    return out;
}

}  // namespace delayptc
