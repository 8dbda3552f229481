#include "delayptc/transit.hpp"

#include "delayptc/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <queue>
#include <set>
#include <tuple>

namespace delayptc {

std::string_view to_string(Direction d) { return d == Direction::Up ? "Up" : "Down"; }

std::optional<Direction> parse_direction(std::string_view text) {
    auto lower = to_lower(trim(text));
    if (lower == "up") return Direction::Up;
    if (lower == "down") return Direction::Down;
    return std::nullopt;
}

Direction opposite(Direction d) { return d == Direction::Up ? Direction::Down : Direction::Up; }

std::optional<std::size_t> Line::index_of(StationId station) const {
    auto it = std::find(stations.begin(), stations.end(), station);
    if (it == stations.end()) return std::nullopt;
    return static_cast<std::size_t>(it - stations.begin());
}

std::size_t Route::hops() const {
    std::size_t n = 0;
    for (const auto& leg : legs) n += leg.stations.size() - 1;
    return n;
}

std::vector<double> Route::cumulative_offsets() const {
    std::vector<double> out;
    for (const auto& leg : legs) out.insert(out.end(), leg.offsets.begin(), leg.offsets.end());
    return out;
}

std::vector<StationId> Route::stations() const {
    std::vector<StationId> out;
    for (const auto& leg : legs) out.insert(out.end(), leg.stations.begin(), leg.stations.end());
    return out;
}

Network Network::build(const std::vector<LineDef>& line_defs, const NetworkParams& params) {
    if (line_defs.empty()) throw Error("empty-line-list", "network needs at least one line");
    if (params.hop_runtime <= 0 || params.access_time < 0 || params.transfer_penalty < 0)
        throw Error("invalid-timing", "hop_runtime must be positive and other constants non-negative");

    Network net;
    net.params_ = params;
    std::set<std::string> line_ids;
    for (const auto& def : line_defs) {
        if (!line_ids.insert(def.id).second) throw Error("duplicate-line", def.id);
        if (def.stations.size() < 2) throw Error("short-line", def.id + " needs at least two stations");
        Line line;
        line.id = def.id;
        line.hop_runtime = def.hop_runtime.value_or(params.hop_runtime);
        if (line.hop_runtime <= 0) throw Error("invalid-timing", def.id + " hop_runtime must be positive");
        std::set<std::string> seen;
        for (const auto& raw : def.stations) {
            auto name = trim(raw);
            if (name.empty()) throw Error("empty-station-name", def.id);
            if (!seen.insert(name).second)
                throw Error("duplicate-station-in-line", name + " repeats on " + def.id);
            auto it = net.by_name_.find(name);
            StationId id;
            if (it == net.by_name_.end()) {
                id = StationId{static_cast<std::uint32_t>(net.stations_.size())};
                net.stations_.push_back({id, name});
                net.by_name_.emplace(name, id);
            } else {
                id = it->second;
            }
            line.stations.push_back(id);
        }
        net.lines_.push_back(std::move(line));
    }
    net.memberships_.resize(net.stations_.size());
    for (std::size_t l = 0; l < net.lines_.size(); ++l)
        for (std::size_t i = 0; i < net.lines_[l].stations.size(); ++i)
            net.memberships_[net.lines_[l].stations[i].value].emplace_back(l, i);
    return net;
}

Network Network::from_json_text(std::string_view text) {
    NetworkParams params;
    std::vector<LineDef> defs;
    try {
        auto doc = nlohmann::json::parse(text);
        if (auto t = doc.find("timing"); t != doc.end()) {
            params.hop_runtime = t->value("hop_runtime", params.hop_runtime);
            params.access_time = t->value("access_time", params.access_time);
            params.transfer_penalty = t->value("transfer_penalty", params.transfer_penalty);
        }
        const auto& lines = doc.at("lines");
        if (!lines.is_array()) throw Error("malformed-network", "\"lines\" must be an array");
        for (const auto& l : lines) {
            LineDef def;
            def.id = l.at("id").get<std::string>();
            def.stations = l.at("stations").get<std::vector<std::string>>();
            if (l.contains("hop_runtime")) def.hop_runtime = l.at("hop_runtime").get<double>();
            defs.push_back(std::move(def));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-network", e.what());
    }
    return build(defs, params);
}

Network Network::load(const std::filesystem::path& path) { return from_json_text(read_file(path)); }

std::string Network::to_json_text() const {
    nlohmann::ordered_json doc;
    doc["timing"] = {{"hop_runtime", params_.hop_runtime},
                     {"access_time", params_.access_time},
                     {"transfer_penalty", params_.transfer_penalty}};
    doc["lines"] = nlohmann::ordered_json::array();
    for (const auto& line : lines_) {
        nlohmann::ordered_json l;
        l["id"] = line.id;
        std::vector<std::string> names;
        for (auto s : line.stations) names.push_back(name(s));
        l["stations"] = names;
        if (line.hop_runtime != params_.hop_runtime) l["hop_runtime"] = line.hop_runtime;
        doc["lines"].push_back(l);
    }
    return doc.dump(2) + "\n";
}

std::optional<StationId> Network::find(std::string_view name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

const Line* Network::line(std::string_view id) const {
    for (const auto& l : lines_)
        if (l.id == id) return &l;
    return nullptr;
}

std::vector<std::string> Network::lines_at(StationId station) const {
    std::vector<std::string> out;
    for (auto [l, i] : memberships_.at(station.value)) out.push_back(lines_[l].id);
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Network::hop_count() const {
    std::size_t n = 0;
    for (const auto& l : lines_) n += l.stations.size() - 1;
    return n;
}

bool Network::is_connected() const {
    if (stations_.empty()) return true;
    std::vector<bool> seen(stations_.size(), false);
    std::vector<std::uint32_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        auto s = stack.back();
        stack.pop_back();
        for (auto [l, i] : memberships_[s]) {
            const auto& st = lines_[l].stations;
            for (auto j : {i - 1, i + 1}) {
                if (j >= st.size()) continue;  // also rejects wrapped i - 1
                if (!seen[st[j].value]) {
                    seen[st[j].value] = true;
                    stack.push_back(st[j].value);
                }
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

namespace {

// Search label ordered by (transfers, hops, line-id sequence, station-name sequence).
// The order is preserved under extension, so settling labels in order is exact.
struct Label {
    std::size_t transfers = 0;
    std::size_t hops = 0;
    std::vector<std::string> line_seq;
    std::vector<std::string> name_seq;
    std::vector<std::pair<std::uint32_t, std::size_t>> path;  // (station, line)

    auto key() const { return std::tie(transfers, hops, line_seq, name_seq); }
    bool operator>(const Label& other) const { return key() > other.key(); }
};

}  // namespace

Route Network::shortest_route(StationId origin, StationId dest) const {
    if (origin.value >= stations_.size() || dest.value >= stations_.size())
        throw Error("unknown-station", "station id out of range");
    if (origin == dest) throw Error("same-station", name(origin));

    std::priority_queue<Label, std::vector<Label>, std::greater<>> open;
    for (auto [l, i] : memberships_[origin.value]) {
        Label start;
        start.line_seq = {lines_[l].id};
        start.name_seq = {name(origin)};
        start.path = {{origin.value, l}};
        open.push(std::move(start));
    }
    std::set<std::pair<std::uint32_t, std::size_t>> settled;
    while (!open.empty()) {
        Label cur = open.top();
        open.pop();
        auto [s, l] = cur.path.back();
        if (!settled.insert({s, l}).second) continue;
        if (s == dest.value) {
            Route route;
            double t = params_.access_time;
            for (std::size_t k = 0; k < cur.path.size(); ++k) {
                auto [ps, pl] = cur.path[k];
                if (route.legs.empty() || route.legs.back().line_id != lines_[pl].id) {
                    if (!route.legs.empty()) t += params_.transfer_penalty;
                    route.legs.push_back({lines_[pl].id, Direction::Up, {}, {}});
                } else {
                    t += lines_[pl].hop_runtime;
                }
                route.legs.back().stations.push_back(StationId{ps});
                route.legs.back().offsets.push_back(t);
            }
            for (auto& leg : route.legs) {
                const auto& line = *this->line(leg.line_id);
                leg.direction = *line.index_of(leg.stations[1]) > *line.index_of(leg.stations[0])
                                    ? Direction::Up
                                    : Direction::Down;
            }
            return route;
        }
        const auto& st = lines_[l].stations;
        auto i = *lines_[l].index_of(StationId{s});
        for (auto j : {i - 1, i + 1}) {
            if (j >= st.size()) continue;
            if (settled.count({st[j].value, l})) continue;
            Label next = cur;
            next.hops += 1;
            next.name_seq.push_back(name(st[j]));
            next.path.push_back({st[j].value, l});
            open.push(std::move(next));
        }
        // Transfers only after riding at least one hop on the current line.
        if (cur.path.size() >= 2 && cur.path[cur.path.size() - 2].second == l) {
            for (auto [l2, i2] : memberships_[s]) {
                if (l2 == l || settled.count({s, l2})) continue;
                Label next = cur;
                next.transfers += 1;
                next.line_seq.push_back(lines_[l2].id);
                next.path.push_back({s, l2});
                open.push(std::move(next));
            }
        }
    }
    throw Error("unreachable", name(origin) + " -> " + name(dest));
}

Route Network::shortest_route(std::string_view origin, std::string_view dest) const {
    auto o = find(origin);
    if (!o) throw Error("unknown-station", std::string(origin));
    auto d = find(dest);
    if (!d) throw Error("unknown-station", std::string(dest));
    return shortest_route(*o, *d);
}

}  // namespace delayptc
