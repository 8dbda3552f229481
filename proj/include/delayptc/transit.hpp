#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace delayptc {

struct StationId {
    std::uint32_t value = 0;
    auto operator<=>(const StationId&) const = default;
};

struct Station {
    StationId id;
    std::string name;
};

enum class Direction { Up, Down };

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view text);
Direction opposite(Direction d);

struct Line {
    std::string id;
    std::vector<StationId> stations;  // declared order; Up = increasing index
    double hop_runtime = 2.5;

    std::optional<std::size_t> index_of(StationId station) const;
};

struct NetworkParams {
    double hop_runtime = 2.5;
    double access_time = 5.0;
    double transfer_penalty = 4.0;
};

struct LineDef {
    std::string id;
    std::vector<std::string> stations;
    std::optional<double> hop_runtime;
};

struct RouteLeg {
    std::string line_id;
    Direction direction = Direction::Up;
    std::vector<StationId> stations;
    std::vector<double> offsets;  // minutes after the entry tap, one per station
};

struct Route {
    std::vector<RouteLeg> legs;

    std::size_t transfers() const { return legs.empty() ? 0 : legs.size() - 1; }
    std::size_t hops() const;
    /// Offsets of every stop in leg order; a transfer station appears once per leg.
    std::vector<double> cumulative_offsets() const;
    std::vector<StationId> stations() const;
};

/// Immutable metro network. Interchanges are stations shared by name across lines.
class Network {
public:
    static Network build(const std::vector<LineDef>& line_defs, const NetworkParams& params = {});
    static Network from_json_text(std::string_view text);
    static Network load(const std::filesystem::path& path);

    std::string to_json_text() const;

    const std::vector<Station>& stations() const { return stations_; }
    const std::vector<Line>& lines() const { return lines_; }
    const NetworkParams& params() const { return params_; }

    std::optional<StationId> find(std::string_view name) const;
    const Station& station(StationId id) const { return stations_.at(id.value); }
    const std::string& name(StationId id) const { return station(id).name; }
    const Line* line(std::string_view id) const;

    /// Ids of lines serving the station, sorted.
    std::vector<std::string> lines_at(StationId station) const;
    bool is_interchange(StationId station) const { return lines_at(station).size() > 1; }
    std::size_t hop_count() const;
    bool is_connected() const;

    /// Minimum-transfer route, then fewest hops, then lexicographic line-id sequence.
    /// Throws Error with code same-station, unknown-station or unreachable.
    Route shortest_route(StationId origin, StationId dest) const;
    Route shortest_route(std::string_view origin, std::string_view dest) const;

private:
    std::vector<Station> stations_;
    std::vector<Line> lines_;
    NetworkParams params_;
    std::map<std::string, StationId, std::less<>> by_name_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> memberships_;  // station -> (line, index)
};

}  // namespace delayptc
