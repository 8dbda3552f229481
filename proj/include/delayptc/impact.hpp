#pragma once

#include "delayptc/afc.hpp"
#include "delayptc/delay_log.hpp"
#include "delayptc/patterns.hpp"
#include "delayptc/transit.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayptc {

struct OverlapDetail {
    std::vector<std::string> stations;  // route stations inside the delayed interval, in travel order
    double segment_entry = 0.0;         // expected minute of day at the first overlapped station
    double window_lo = 0.0;             // padded passenger window at that station
    double window_hi = 0.0;
    int delay_start = 0;
    int delay_end = 0;
};

struct AffectedInstance {
    std::string card_id;
    std::string pattern_key;
    int event_id = 0;
    OverlapDetail overlap;
};

struct ImpactParams {
    double window_pad_minutes = 10.0;
};

/// Spatial part of the overlap rule: the longest run of consecutive route stations
/// (at least two) inside the event interval, ridden on the event line in the event
/// direction. Returns the run and the route offset of its first station.
std::optional<std::pair<std::vector<StationId>, double>> spatial_overlap(const Route& route, const DelayEvent& event,
                                                                        const Network& network);

/// Affected iff the route rides through the interval (see spatial_overlap) and
/// [mean - std - pad, mean + std + pad] shifted by the offset to the first
/// overlapped station intersects [start, end]. Unroutable ODs are not affected.
std::optional<AffectedInstance> is_affected(const TravelPattern& pattern, const DelayEvent& event,
                                            const Network& network, const ImpactParams& params = {});

/// Same as above with a precomputed route for the pattern's OD.
std::optional<AffectedInstance> is_affected(const TravelPattern& pattern, const DelayEvent& event, const Route& route,
                                            const Network& network, const ImpactParams& params = {});

/// True iff the card tapped in at the pattern origin on the event date at or
/// before the delay start, no earlier than mean - 3 * max(std, 15) minutes.
bool started_before_delay(const std::vector<AfcRecord>& day_records, const TravelPattern& pattern,
                          const DelayEvent& event);

/// All (event, card) instances; one per pair, keeping the pattern with the
/// earliest entry_mean. Ordered by (event_id, card_id).
std::vector<AffectedInstance> find_affected(const std::vector<TravelPattern>& patterns,
                                            const std::vector<DelayEvent>& events, const Network& network,
                                            const ImpactParams& params = {});

std::string format_affected_jsonl(const std::vector<AffectedInstance>& instances);
std::vector<AffectedInstance> parse_affected_jsonl(std::string_view text);

}  // namespace delayptc
