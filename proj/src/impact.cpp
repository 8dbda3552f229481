#include "delayptc/impact.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>

namespace delayptc {

std::optional<std::pair<std::vector<StationId>, double>> spatial_overlap(const Route& route, const DelayEvent& event,
                                                                        const Network& network) {
    const Line* line = network.line(event.line);
    if (!line) return std::nullopt;
    auto a = network.find(event.from_station);
    auto b = network.find(event.to_station);
    if (!a || !b) return std::nullopt;
    auto ia = line->index_of(*a);
    auto ib = line->index_of(*b);
    if (!ia || !ib) return std::nullopt;
    auto lo = std::min(*ia, *ib);
    auto hi = std::max(*ia, *ib);

    for (const auto& leg : route.legs) {
        if (leg.line_id != event.line || leg.direction != event.direction) continue;
        std::vector<StationId> run;
        double first_offset = 0.0;
        for (std::size_t k = 0; k < leg.stations.size(); ++k) {
            auto idx = *line->index_of(leg.stations[k]);
            if (idx < lo || idx > hi) continue;
            if (run.empty()) first_offset = leg.offsets[k];
            run.push_back(leg.stations[k]);
        }
        // A single boundary station is contact, not traversal.
        if (run.size() >= 2) return std::make_pair(std::move(run), first_offset);
    }
    return std::nullopt;
}

std::optional<AffectedInstance> is_affected(const TravelPattern& pattern, const DelayEvent& event, const Route& route,
                                            const Network& network, const ImpactParams& params) {
    auto overlap = spatial_overlap(route, event, network);
    if (!overlap) return std::nullopt;
    double at = pattern.entry_mean + overlap->second;
    double lo = at - pattern.entry_std - params.window_pad_minutes;
    double hi = at + pattern.entry_std + params.window_pad_minutes;
    if (lo > event.end || hi < event.start) return std::nullopt;

    AffectedInstance inst;
    inst.card_id = pattern.card_id;
    inst.pattern_key = pattern.key;
    inst.event_id = event.event_id;
    for (auto s : overlap->first) inst.overlap.stations.push_back(network.name(s));
    inst.overlap.segment_entry = at;
    inst.overlap.window_lo = lo;
    inst.overlap.window_hi = hi;
    inst.overlap.delay_start = event.start;
    inst.overlap.delay_end = event.end;
    return inst;
}

std::optional<AffectedInstance> is_affected(const TravelPattern& pattern, const DelayEvent& event,
                                            const Network& network, const ImpactParams& params) {
    try {
        auto route = network.shortest_route(pattern.origin, pattern.dest);
        return is_affected(pattern, event, route, network, params);
    } catch (const Error& e) {
        spdlog::debug("pattern {} not routable: {}", pattern.key, e.what());
        return std::nullopt;
    }
}

bool started_before_delay(const std::vector<AfcRecord>& day_records, const TravelPattern& pattern,
                          const DelayEvent& event) {
    double earliest = pattern.entry_mean - 3.0 * std::max(pattern.entry_std, 15.0);
    return std::any_of(day_records.begin(), day_records.end(), [&](const AfcRecord& r) {
        if (r.type != TxnType::MetroEntry || r.card_id != pattern.card_id || r.location != pattern.origin) return false;
        if (date_of(r.timestamp) != event.date) return false;
        double t = minute_of_day(r.timestamp);
        return t <= event.start && t >= earliest;
    });
}

std::vector<AffectedInstance> find_affected(const std::vector<TravelPattern>& patterns,
                                            const std::vector<DelayEvent>& events, const Network& network,
                                            const ImpactParams& params) {
    std::map<OdPair, std::optional<Route>> routes;
    for (const auto& p : patterns) {
        auto [it, fresh] = routes.try_emplace({p.origin, p.dest});
        if (!fresh) continue;
        try {
            it->second = network.shortest_route(p.origin, p.dest);
        } catch (const Error& e) {
            spdlog::warn("no route for {} -> {}: {}", p.origin, p.dest, e.what());
        }
    }

    std::map<std::pair<int, std::string>, std::pair<const TravelPattern*, AffectedInstance>> best;
    for (const auto& event : events) {
        for (const auto& p : patterns) {
            const auto& route = routes[{p.origin, p.dest}];
            if (!route) continue;
            auto inst = is_affected(p, event, *route, network, params);
            if (!inst) continue;
            auto key = std::make_pair(event.event_id, p.card_id);
            auto it = best.find(key);
            if (it == best.end() || std::tie(p.entry_mean, p.key) <
                                        std::tie(it->second.first->entry_mean, it->second.first->key))
                best.insert_or_assign(key, std::make_pair(&p, std::move(*inst)));
        }
    }
    std::vector<AffectedInstance> out;
    out.reserve(best.size());
    for (auto& [key, v] : best) out.push_back(std::move(v.second));
    return out;
}

std::string format_affected_jsonl(const std::vector<AffectedInstance>& instances) {
    std::string out;
    for (const auto& i : instances) {
        nlohmann::ordered_json j;
        j["card_id"] = i.card_id;
        j["pattern_key"] = i.pattern_key;
        j["event_id"] = i.event_id;
        j["overlap_stations"] = i.overlap.stations;
        j["segment_entry"] = i.overlap.segment_entry;
        j["window"] = {i.overlap.window_lo, i.overlap.window_hi};
        j["delay_window"] = {i.overlap.delay_start, i.overlap.delay_end};
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<AffectedInstance> parse_affected_jsonl(std::string_view text) {
    std::vector<AffectedInstance> out;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            AffectedInstance i;
            i.card_id = j.at("card_id").get<std::string>();
            i.pattern_key = j.at("pattern_key").get<std::string>();
            i.event_id = j.at("event_id").get<int>();
            i.overlap.stations = j.at("overlap_stations").get<std::vector<std::string>>();
            i.overlap.segment_entry = j.at("segment_entry").get<double>();
            i.overlap.window_lo = j.at("window").at(0).get<double>();
            i.overlap.window_hi = j.at("window").at(1).get<double>();
            i.overlap.delay_start = j.at("delay_window").at(0).get<int>();
            i.overlap.delay_end = j.at("delay_window").at(1).get<int>();
            out.push_back(std::move(i));
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed-affected-file", e.what());
        }
    }
    return out;
}

}  // namespace delayptc
