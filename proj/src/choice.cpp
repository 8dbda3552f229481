#include "delayptc/choice.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

namespace delayptc {

std::string_view to_string(ChoiceLabel label) { return label == ChoiceLabel::Wait ? "Wait" : "Abandon"; }

std::optional<ChoiceLabel> parse_choice_label(std::string_view text) {
    auto lower = to_lower(trim(text));
    if (lower == "wait") return ChoiceLabel::Wait;
    if (lower == "abandon") return ChoiceLabel::Abandon;
    return std::nullopt;
}

std::string_view to_string(DelayPeriod period) {
    switch (period) {
    case DelayPeriod::MorningPeak: return "MorningPeak";
    case DelayPeriod::EveningPeak: return "EveningPeak";
    case DelayPeriod::OffPeak: return "OffPeak";
    }
    return "";
}

std::optional<DelayPeriod> parse_delay_period(std::string_view text) {
    for (auto p : {DelayPeriod::MorningPeak, DelayPeriod::EveningPeak, DelayPeriod::OffPeak})
        if (text == to_string(p)) return p;
    return std::nullopt;
}

DelayPeriod delay_period(int minute, const PeakWindows& w) {
    if (minute >= w.morning_start && minute < w.morning_end) return DelayPeriod::MorningPeak;
    if (minute >= w.evening_start && minute < w.evening_end) return DelayPeriod::EveningPeak;
    return DelayPeriod::OffPeak;
}

LabelOutcome label_choice(const std::vector<Trip>& day_trips, const std::vector<AfcRecord>& day_bus_records,
                          const TravelPattern& pattern, const DelayEvent& event, const LabelParams& params) {
    double lo = pattern.entry_mean - 3.0 * pattern.entry_std - params.slack_minutes;
    double hi = event.end + params.slack_minutes;

    std::optional<Timestamp> completed;  // latest qualifying entry
    std::optional<Timestamp> abandoned;  // latest same-station exit at the origin in the window
    for (const auto& t : day_trips) {
        if (t.card_id != pattern.card_id || date_of(t.entry_time) != event.date) continue;
        if (t.same_station) {
            double exit = minute_of_day(t.exit_time);
            if (t.origin == pattern.origin && exit >= event.start && exit <= event.end)
                abandoned = abandoned ? std::max(*abandoned, t.exit_time) : t.exit_time;
            continue;
        }
        if (t.origin != pattern.origin || t.dest != pattern.dest) continue;
        double entry = minute_of_day(t.entry_time);
        if (entry >= lo && entry <= hi) completed = completed ? std::max(*completed, t.entry_time) : t.entry_time;
    }

    LabelOutcome out;
    if (completed && abandoned) {
        out.conflict = true;
        out.label = *completed > *abandoned ? ChoiceLabel::Wait : ChoiceLabel::Abandon;
    } else {
        out.label = completed ? ChoiceLabel::Wait : ChoiceLabel::Abandon;
    }
    out.corroborated = std::any_of(day_bus_records.begin(), day_bus_records.end(), [&](const AfcRecord& r) {
        if (is_metro(r.type) || r.card_id != pattern.card_id || date_of(r.timestamp) != event.date) return false;
        double t = minute_of_day(r.timestamp);
        return t >= event.start && t <= hi;
    });
    return out;
}

double urgency(std::span<const double> entry_minutes) {
    if (entry_minutes.size() < 2) return 0.0;
    return mean_and_population_std(entry_minutes).std;
}

ChoiceRecord featurize(const AffectedInstance& instance, const TravelPattern& pattern, const DelayEvent& event,
                       bool started, const PeakWindows& windows) {
    ChoiceRecord r;
    r.card_id = instance.card_id;
    r.event_id = instance.event_id;
    r.v1 = event.delay_type;
    r.v2 = delay_period(event.start, windows);
    r.p1 = pattern.mean_duration;
    r.p2 = started;
    r.p3 = urgency(pattern);
    return r;
}

std::string format_dataset(const std::vector<ChoiceRecord>& records) {
    std::string out = "card_id\tevent_id\tv1\tv2\tp1\tp2\tp3\tlabel\n";
    for (const auto& r : records)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.card_id, r.event_id, to_string(r.v1), to_string(r.v2),
                           format_decimal(r.p1, 4), r.p2 ? "true" : "false", format_decimal(r.p3, 4),
                           r.label ? to_string(*r.label) : "");
    return out;
}

std::vector<ChoiceRecord> parse_dataset(std::string_view text) {
    std::vector<ChoiceRecord> out;
    std::size_t line_no = 0;
    auto bad = [&](const std::string& why) { return Error("malformed-dataset", fmt::format("line {}: {}", line_no, why)); };
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 8) throw bad("expected 8 columns");
        ChoiceRecord r;
        r.card_id = f[0];
        auto [p, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), r.event_id);
        if (ec != std::errc{}) throw bad("event_id");
        auto v1 = parse_delay_type(f[2]);
        auto v2 = parse_delay_period(f[3]);
        if (!v1 || !v2) throw bad("categorical value");
        r.v1 = *v1;
        r.v2 = *v2;
        auto p1 = std::from_chars(f[4].data(), f[4].data() + f[4].size(), r.p1);
        auto p3 = std::from_chars(f[6].data(), f[6].data() + f[6].size(), r.p3);
        if (p1.ec != std::errc{} || p3.ec != std::errc{}) throw bad("numeric value");
        if (f[5] != "true" && f[5] != "false") throw bad("p2");
        r.p2 = f[5] == "true";
        if (!f[7].empty()) {
            r.label = parse_choice_label(f[7]);
            if (!r.label) throw bad("label");
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace delayptc
