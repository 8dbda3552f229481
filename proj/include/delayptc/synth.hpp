#pragma once

#include "delayptc/afc.hpp"
#include "delayptc/choice.hpp"
#include "delayptc/delay_log.hpp"
#include "delayptc/impact.hpp"
#include "delayptc/patterns.hpp"
#include "delayptc/transit.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace delayptc {

/// Lines 1, 5 and 11 of a Shenzhen-like network. Up runs toward Luohu,
/// Huangbei Ling and Bitou respectively.
std::vector<LineDef> shenzhen_lines();

/// The fourteen recorded delays of August-September 2019.
std::vector<DelayEvent> recorded_delays();
/// Six of the recorded delays used by default in synthetic worlds.
std::vector<DelayEvent> default_world_events();

struct WorldConfig {
    std::uint64_t seed = 20190801;
    std::vector<LineDef> lines = shenzhen_lines();
    NetworkParams network;

    std::size_t regular_count = 3500;
    std::size_t casual_count = 1500;
    Date first_day{std::chrono::year{2019}, std::chrono::August, std::chrono::day{1}};
    std::size_t weekday_count = 41;

    // Habitual entry times: uniform jitter of half-width in [min_jitter, max_jitter]
    // around a center drawn from the morning / evening ranges.
    double min_jitter = 3.0;
    double max_jitter = 25.0;
    double morning_lo = 400.0;
    double morning_hi = 560.0;
    double evening_lo = 1020.0;
    double evening_hi = 1150.0;
    std::optional<double> fixed_morning_center;
    std::optional<double> fixed_evening_center;

    std::vector<DelayEvent> events = default_world_events();
    double targeted_share = 0.4;  // regulars whose habitual trip is steered through an event interval

    double abandon_rate = 0.19;
    double high_propensity_weight = 15.0;  // relative odds when not started, morning peak, urgency below threshold
    double urgency_threshold = 6.0;
    double noise_rate = 0.0;              // share of instances whose emitted behavior contradicts the label
    double bus_tap_share = 0.6;           // abandoners leaving a bus tap

    ScreenParams screen;
    ClusterParams cluster;
    ImpactParams impact;
    LabelParams label;
    PeakWindows peaks;
};

struct PlantedRegular {
    std::string card_id;
    std::string home;
    std::string work;
    double morning_center = 0.0;
    double evening_center = 0.0;
    double morning_jitter = 0.0;
    double evening_jitter = 0.0;
    std::size_t normal_days = 0;
};

struct GroundTruth {
    std::vector<std::string> regular_cards;  // sorted
    std::vector<std::string> casual_cards;   // sorted
    std::vector<PlantedRegular> planted;     // sorted by card
    std::vector<TravelPattern> patterns;     // exact statistics of the emitted normal-day trips
    std::vector<AffectedInstance> affected;  // ordered by (event_id, card_id)
    std::vector<ChoiceRecord> labeled;       // features and planted label, same order as affected
};

struct World {
    Network network;
    Calendar calendar;
    std::vector<DelayEvent> events;
    std::vector<AfcRecord> records;  // ordered by (timestamp, card_id)
    std::string narratives;          // one narrative per event, blank-line separated
    GroundTruth truth;
};

/// Throws Error("infeasible-config") for invalid parameters or events that do
/// not lie on the network.
World generate_world(const WorldConfig& config);

inline constexpr int kNarrativeTemplateCount = 3;

/// Free-text delay log for an event. Train numbers and per-train delays are
/// drawn from rng; everything else comes from the event.
std::string render_narrative(const DelayEvent& event, const Network& network, int template_index, Rng& rng);

}  // namespace delayptc
