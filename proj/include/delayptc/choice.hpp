#pragma once

#include "delayptc/afc.hpp"
#include "delayptc/delay_log.hpp"
#include "delayptc/impact.hpp"
#include "delayptc/patterns.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

/// Abandon is the positive class.
enum class ChoiceLabel { Wait, Abandon };
std::string_view to_string(ChoiceLabel label);
std::optional<ChoiceLabel> parse_choice_label(std::string_view text);

enum class DelayPeriod { MorningPeak, EveningPeak, OffPeak };
std::string_view to_string(DelayPeriod period);
std::optional<DelayPeriod> parse_delay_period(std::string_view text);

struct PeakWindows {
    int morning_start = 7 * 60;
    int morning_end = 9 * 60 + 30;  // exclusive
    int evening_start = 17 * 60;
    int evening_end = 19 * 60 + 30;
};

DelayPeriod delay_period(int minute_of_day, const PeakWindows& windows = {});

struct RecordKey {
    std::string card_id;
    int event_id = 0;
    auto operator<=>(const RecordKey&) const = default;
};

/// Two event features (v1, v2) and three passenger features (p1, p2, p3).
struct ChoiceRecord {
    std::string card_id;
    int event_id = 0;
    DelayType v1 = DelayType::Others;
    DelayPeriod v2 = DelayPeriod::OffPeak;
    double p1 = 0.0;    // mean trip duration of the affected pattern, minutes
    bool p2 = false;    // started before the delay
    double p3 = 0.0;    // urgency: population std of entry times, minutes
    std::optional<ChoiceLabel> label;

    RecordKey key() const { return {card_id, event_id}; }
};

inline constexpr std::size_t kEventFeatureCount = 2;
inline constexpr std::size_t kPassengerFeatureCount = 3;

struct LabelParams {
    double slack_minutes = 60.0;
};

struct LabelOutcome {
    ChoiceLabel label = ChoiceLabel::Abandon;
    bool corroborated = false;  // bus tap during [start, end + slack]
    bool conflict = false;      // qualifying trip and same-station exit both present
};

/// Wait iff a completed trip on the pattern OD entered within
/// [mean - 3*p3 - slack, end + slack]; a same-station exit at the origin inside
/// the delay window means Abandon unless the completed trip came after it.
/// Only the event date's trips and bus records are considered.
LabelOutcome label_choice(const std::vector<Trip>& day_trips, const std::vector<AfcRecord>& day_bus_records,
                          const TravelPattern& pattern, const DelayEvent& event, const LabelParams& params = {});

/// Population standard deviation of entry minutes; 0 for fewer than two values.
double urgency(std::span<const double> entry_minutes);
inline double urgency(const TravelPattern& pattern) { return pattern.entry_std; }

/// Features only; delay-day behaviour enters solely through `started`.
ChoiceRecord featurize(const AffectedInstance& instance, const TravelPattern& pattern, const DelayEvent& event,
                       bool started, const PeakWindows& windows = {});

std::string format_dataset(const std::vector<ChoiceRecord>& records);
std::vector<ChoiceRecord> parse_dataset(std::string_view text);

}  // namespace delayptc
