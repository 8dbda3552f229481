#pragma once

#include "delayptc/afc.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace delayptc {

using OdPair = std::pair<std::string, std::string>;

struct ScreenParams {
    std::size_t day_threshold = 20;
    std::size_t od_day_threshold = 10;
};

struct ScreenedCard {
    std::string card_id;
    std::size_t travel_days = 0;
    std::map<OdPair, std::size_t> od_days;  // distinct days per OD pair
};

/// Cards with enough distinct travel days and at least one spatially consistent
/// OD pair. Same-station trips are not counted. Output sorted by card_id.
std::vector<ScreenedCard> screen_regulars(const std::vector<Trip>& trips, const ScreenParams& params = {});

struct ClusterParams {
    double eps_minutes = 45.0;
    std::size_t min_pts = 5;
};

struct TravelPattern {
    std::string card_id;
    std::string origin;
    std::string dest;
    double entry_mean = 0.0;  // minutes of day
    double entry_std = 0.0;   // population std of entry minutes
    double mean_duration = 0.0;
    std::size_t trip_count = 0;
    std::size_t day_count = 0;

    /// Stable key "<card>#<k>", k = index among the card's patterns.
    std::string key;
};

/// Sorted-gap clustering of entry times per OD pair. Returns patterns for one
/// card ordered by (origin, dest, entry_mean); keys are assigned in that order.
std::vector<TravelPattern> mine_patterns(const std::vector<Trip>& card_trips, const ClusterParams& params = {});

/// Gap-cut on sorted values: a new cluster starts wherever the gap exceeds eps.
std::vector<std::vector<double>> gap_clusters(std::vector<double> values, double eps);

struct RegularPassenger {
    std::string card_id;
    std::size_t travel_day_count = 0;
    std::vector<TravelPattern> patterns;
};

struct MiningParams {
    ScreenParams screen;
    ClusterParams cluster;
    std::set<Date> excluded_dates;  // dates whose trips are left out of pattern statistics
};

/// Screening followed by per-card clustering; cards without any pattern are dropped.
std::vector<RegularPassenger> mine_regulars(const std::vector<Trip>& trips, const MiningParams& params = {});

std::string format_patterns(const std::vector<TravelPattern>& patterns);
std::vector<TravelPattern> parse_patterns(std::string_view text);
std::string format_regulars(const std::vector<RegularPassenger>& regulars);

}  // namespace delayptc
