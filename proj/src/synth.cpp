#include "delayptc/synth.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace delayptc {

std::vector<LineDef> shenzhen_lines() {
    return {
        {"Line 1",
         {"Airport East", "Hourui", "Gushu", "Xixiang", "Pingzhou", "Baoti", "Bao'an Center", "Xin'an", "Qianhaiwan",
          "Liyumen", "Daxin", "Taoyuan", "Shenzhen University", "Hi-Tech Park", "Baishizhou", "Window of the World",
          "Huaqiaocheng", "Qiaocheng East", "Zhuzilin", "Chegongmiao", "Xiangmihu", "Shopping Park",
          "Convention Center", "Gangxia", "Huaqiang Road", "Science Museum", "Grand Theater", "Laojie", "Guomao",
          "Luohu"},
         std::nullopt},
        {"Line 5",
         {"Qianwan Park", "Qianhaiwan", "Linhai", "Bao'an Center", "Fanshen", "Lingzhi", "Honglang North", "Xingdong",
          "Liuxiandong", "Xili", "University Town", "Tanglang", "Changlingpi", "Shenzhen North", "Minzhi", "Wuhe",
          "Bantian", "Yangmei", "Shangshuijing", "Xiashuijing", "Changlong", "Buji", "Baigelong", "Buxin", "Tai'an",
          "Yijing", "Huangbei Ling"},
         std::nullopt},
        {"Line 11",
         {"Futian", "Chegongmiao", "Hongshuwan South", "Houhai", "Nanshan", "Qianhaiwan", "Bao'an", "Bihaiwan",
          "Airport", "Airport North", "Fuyong", "Qiaotou", "Tangwei", "Shajing", "Houting", "Songgang", "Bitou"},
         std::nullopt},
    };
}

namespace {

DelayEvent make_event(int id, const char* line, DelayType type, const char* date, const char* start, const char* end,
                      const char* from, const char* to, Direction dir) {
    return {id, line, type, *parse_date(date), *parse_hhmm(start), *parse_hhmm(end), from, to, dir};
}

}  // namespace

std::vector<DelayEvent> recorded_delays() {
    using enum DelayType;
    const auto up = Direction::Up;
    const auto down = Direction::Down;
    return {
        make_event(1, "Line 1", VehicleFault, "2019-08-27", "08:10", "09:09", "Taoyuan", "Luohu", up),
        make_event(2, "Line 1", VehicleFault, "2019-09-26", "08:57", "09:49", "Pingzhou", "Airport East", down),
        make_event(3, "Line 1", SignalingFault, "2019-09-19", "18:04", "19:08", "Shenzhen University", "Airport East",
                   down),
        make_event(4, "Line 1", SignalingFault, "2019-09-20", "16:03", "17:10", "Xin'an", "Qianhaiwan", up),
        make_event(5, "Line 1", PowerFault, "2019-09-26", "06:31", "06:55", "Grand Theater", "Luohu", up),
        make_event(6, "Line 1", PowerFault, "2019-09-26", "06:31", "07:50", "Luohu", "Airport East", down),
        make_event(7, "Line 5", VehicleFault, "2019-08-26", "07:49", "08:52", "University Town", "Huangbei Ling", up),
        make_event(8, "Line 5", VehicleFault, "2019-09-30", "07:53", "09:13", "Xiashuijing", "Qianwan Park", down),
        make_event(9, "Line 5", ImproperOperation, "2019-08-20", "07:54", "09:14", "Bao'an Center", "Huangbei Ling",
                   up),
        make_event(10, "Line 5", Others, "2019-08-01", "09:32", "10:41", "Baigelong", "Qianwan Park", down),
        make_event(11, "Line 5", Others, "2019-08-07", "07:55", "08:36", "Tanglang", "Qianwan Park", down),
        make_event(12, "Line 5", Others, "2019-08-20", "07:50", "08:36", "Minzhi", "Qianwan Park", down),
        make_event(13, "Line 11", PowerFault, "2019-08-12", "08:08", "09:08", "Fuyong", "Futian", up),
        make_event(14, "Line 11", Others, "2019-08-28", "08:22", "09:33", "Bihaiwan", "Bitou", up),
    };
}

std::vector<DelayEvent> default_world_events() {
    auto all = recorded_delays();
    std::vector<DelayEvent> out;
    for (int id : {1, 3, 9, 11, 12, 13}) out.push_back(all[static_cast<std::size_t>(id - 1)]);
    return out;
}

// Narratives.

namespace {

const char* kMonths[] = {"January", "February", "March",     "April",   "May",      "June",
                         "July",    "August",   "September", "October", "November", "December"};

std::string long_date(Date d) {
    return fmt::format("{} {}, {}", kMonths[static_cast<unsigned>(d.month()) - 1], static_cast<unsigned>(d.day()),
                       static_cast<int>(d.year()));
}

std::string day_month_date(Date d) {
    return fmt::format("{} {} {}", static_cast<unsigned>(d.day()), kMonths[static_cast<unsigned>(d.month()) - 1],
                       static_cast<int>(d.year()));
}

std::string clock12(int minutes, bool dotted) {
    int h = minutes / 60;
    int m = minutes % 60;
    int h12 = h % 12 == 0 ? 12 : h % 12;
    const char* suffix = h < 12 ? (dotted ? "a.m." : "AM") : (dotted ? "p.m." : "PM");
    return fmt::format("{}:{:02d} {}", h12, m, suffix);
}

std::string cause_phrase(DelayType type, int variant) {
    static const char* phrases[3][5] = {
        {"a vehicle fault (brake cylinder leak)", "a signaling fault on the interlocking",
         "a power fault in the traction supply", "an improper operation during shunting",
         "an object jamming a platform door"},
        {"a vehicle fault on the lead car", "a signaling fault near the platform", "a power fault at a substation",
         "an improper operation by the station crew", "a passenger door obstruction"},
        {"A vehicle fault", "A signaling fault", "A power fault", "An improper operation",
         "A foreign object on the track"},
    };
    auto idx = static_cast<std::size_t>(std::find(std::begin(kAllDelayTypes), std::end(kAllDelayTypes), type) -
                                        std::begin(kAllDelayTypes));
    return phrases[variant][idx];
}

std::string train_number(Rng& rng) {
    auto train = rng.uniform_int(100, 9999);
    auto car = rng.uniform_int(100, 999);
    return fmt::format("{:05d} ({})", train, car);
}

}  // namespace

std::string render_narrative(const DelayEvent& e, const Network& network, int template_index, Rng& rng) {
    const Line* line = network.line(e.line);
    if (!line) throw Error("infeasible-config", "event line " + e.line + " is not in the network");
    const auto& terminus = network.name(e.direction == Direction::Up ? line->stations.back() : line->stations.front());
    std::string dir = to_lower(to_string(e.direction));
    switch (template_index % kNarrativeTemplateCount) {
    case 0: {
        // Draw in a fixed order; argument evaluation order is unspecified.
        auto reporting = train_number(rng);
        auto delayed = train_number(rng);
        auto minutes = rng.uniform_int(2, 9);
        auto seconds = rng.uniform_int(0, 59);
        return fmt::format(
            "Event No. {}: On {}, at {}, the driver of train {} reported {} on the {} line of {} between {} and {}. "
            "Train {} destined for {} was delayed by {} minutes {} seconds. Normal service on the section was "
            "restored at {}.",
            e.event_id, long_date(e.date), clock12(e.start, false), reporting, cause_phrase(e.delay_type, 0), dir,
            e.line, e.from_station, e.to_station, delayed, terminus, minutes, seconds, clock12(e.end, false));
    }
    case 1:
        return fmt::format(
            "Incident #{} ({}). {}, {}-bound track: at {} the control center logged {}, affecting trains running "
            "from {} to {}. Crews were sent to the site. The last delayed train cleared the section at {}.",
            e.event_id, format_date(e.date), e.line, to_string(e.direction), format_hhmm(e.start),
            cause_phrase(e.delay_type, 1), e.from_station, e.to_station, format_hhmm(e.end));
    default:
        return fmt::format(
            "{}, {}. Event No. {}. {} was reported at {} on the {}ward track near {}; the section from {} to {} was "
            "affected. Operations resumed at {}",
            day_month_date(e.date), e.line, e.event_id, cause_phrase(e.delay_type, 2), clock12(e.start, true), dir,
            e.from_station, e.from_station, e.to_station, clock12(e.end, true));
    }
}

// World generation.

namespace {

constexpr double kDayStart = 300.0;  // earliest habitual entry, minutes
constexpr double kDayEnd = 1260.0;

struct PlannedPattern {
    std::string origin;
    std::string dest;
    double center = 0.0;
    double jitter = 0.0;
};

struct RegularPlan {
    PlantedRegular info;
    PlannedPattern morning;
    PlannedPattern evening;
    double duration_offset = 0.0;  // personal walking time on top of the ride
    double travel_prob = 1.0;
};

class WorldBuilder {
public:
    explicit WorldBuilder(const WorldConfig& cfg)
        : cfg_(cfg), network_(Network::build(cfg.lines, cfg.network)), rng_(cfg.seed) {}

    World build() {
        validate();
        build_calendar();
        assign_card_ids();

        std::vector<RegularPlan> plans;
        plans.reserve(cfg_.regular_count);
        for (std::size_t i = 0; i < cfg_.regular_count; ++i) plans.push_back(plan_regular(card_ids_[i]));
        for (auto& plan : plans) emit_normal_days(plan);
        for (std::size_t j = 0; j < cfg_.casual_count; ++j) emit_casual(card_ids_[cfg_.regular_count + j]);

        // Patterns are mined from exactly the emitted normal-day trips.
        World world{network_, calendar_, cfg_.events, {}, {}, {}};
        auto& truth = world.truth;
        for (const auto& plan : plans) {
            auto mined = mine_patterns(normal_trips_[plan.info.card_id], cfg_.cluster);
            truth.patterns.insert(truth.patterns.end(), mined.begin(), mined.end());
        }
        truth.affected = find_affected(truth.patterns, cfg_.events, network_, cfg_.impact);

        auto labels = emit_event_days(plans, truth);

        std::sort(records_.begin(), records_.end(), [](const AfcRecord& a, const AfcRecord& b) {
            return std::tie(a.timestamp, a.card_id, a.type, a.location) <
                   std::tie(b.timestamp, b.card_id, b.type, b.location);
        });
        world.records = std::move(records_);
        fill_truth(world, plans, labels);
        world.narratives = render_all_narratives();
        return world;
    }

private:
    void validate() const {
        auto fail = [](const std::string& why) { return Error("infeasible-config", why); };
        if (cfg_.abandon_rate <= 0.0 || cfg_.abandon_rate >= 1.0) throw fail("abandon rate must lie in (0, 1)");
        if (cfg_.noise_rate < 0.0 || cfg_.noise_rate > 1.0) throw fail("noise rate must lie in [0, 1]");
        if (cfg_.min_jitter <= 0.0 || cfg_.max_jitter < cfg_.min_jitter) throw fail("bad jitter range");
        if (cfg_.screen.day_threshold < 5 || cfg_.screen.od_day_threshold < 3)
            throw fail("screening thresholds too small to plant casuals with a margin of 2");
        if (network_.stations().size() < 2) throw fail("network too small");
        for (const auto& e : cfg_.events)
            if (auto why = validate_event(e, &network_))
                throw fail(fmt::format("event {}: {}", e.event_id, *why));
    }

    void build_calendar() {
        std::chrono::sys_days day{cfg_.first_day};
        while (weekdays_.size() < cfg_.weekday_count) {
            Date d{day};
            bool weekday = !is_weekend(d);
            calendar_.set(d, weekday ? "weekday" : "weekend");
            if (weekday) weekdays_.push_back(d);
            day += std::chrono::days{1};
        }
        for (const auto& e : cfg_.events) {
            if (!calendar_.is_weekday(e.date))
                throw Error("infeasible-config", fmt::format("event {} falls outside the weekday span", e.event_id));
            event_dates_.insert(e.date);
        }
        for (auto d : weekdays_)
            if (!event_dates_.contains(d)) normal_days_.push_back(d);
        std::size_t need = std::max({cfg_.screen.day_threshold, cfg_.screen.od_day_threshold, cfg_.cluster.min_pts}) + 2;
        if (cfg_.regular_count > 0 && normal_days_.size() < need)
            throw Error("infeasible-config",
                        fmt::format("{} normal weekdays cannot plant regulars needing {}", normal_days_.size(), need));
    }

    void assign_card_ids() {
        std::size_t n = cfg_.regular_count + cfg_.casual_count;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng_.shuffle(perm);
        for (auto p : perm) card_ids_.push_back(fmt::format("{}", 300000000 + p * 7 + 11));
    }

    const std::string& random_station() {
        const auto& st = network_.stations();
        return st[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(st.size()) - 1))].name;
    }

    std::pair<std::string, std::string> random_od() {
        std::string a = random_station();
        std::string b = random_station();
        while (b == a) b = random_station();
        return {a, b};
    }

    const Route& route(const std::string& o, const std::string& d) {
        auto [it, fresh] = routes_.try_emplace({o, d});
        if (fresh) it->second = network_.shortest_route(o, d);
        return it->second;
    }

    // Minutes from entry tap to exit tap for an unhurried passenger.
    double ride_minutes(const std::string& o, const std::string& d) {
        const auto& r = route(o, d);
        return r.legs.back().offsets.back() + cfg_.network.access_time;
    }

    // An OD pair whose route rides the event interval in the event direction.
    std::optional<std::pair<std::string, std::string>> pick_through(const DelayEvent& e) {
        const Line& line = *network_.line(e.line);
        auto ia = *line.index_of(*network_.find(e.from_station));
        auto ib = *line.index_of(*network_.find(e.to_station));
        auto lo = static_cast<std::int64_t>(std::min(ia, ib));
        auto hi = static_cast<std::int64_t>(std::max(ia, ib));
        auto n = static_cast<std::int64_t>(line.stations.size());
        for (int attempt = 0; attempt < 50; ++attempt) {
            std::int64_t a, b;
            if (e.direction == Direction::Up) {
                a = rng_.uniform_int(0, hi - 1);
                b = rng_.uniform_int(std::max(a, lo) + 1, n - 1);
            } else {
                a = rng_.uniform_int(lo + 1, n - 1);
                b = rng_.uniform_int(0, std::min(a, hi) - 1);
            }
            std::string o = network_.name(line.stations[static_cast<std::size_t>(a)]);
            std::string d = network_.name(line.stations[static_cast<std::size_t>(b)]);
            if (rng_.bernoulli(0.3)) d = random_station();  // some continue beyond the line
            if (o == d) continue;
            if (spatial_overlap(route(o, d), e, network_)) return std::make_pair(o, d);
        }
        return std::nullopt;
    }

    double draw_jitter() {
        return cfg_.max_jitter > cfg_.min_jitter ? rng_.uniform(cfg_.min_jitter, cfg_.max_jitter) : cfg_.min_jitter;
    }

    RegularPlan plan_regular(const std::string& card) {
        RegularPlan plan;
        plan.info.card_id = card;

        std::optional<std::pair<std::string, std::string>> through;
        const DelayEvent* target = nullptr;
        if (!cfg_.events.empty() && rng_.bernoulli(cfg_.targeted_share)) {
            target = &cfg_.events[static_cast<std::size_t>(
                rng_.uniform_int(0, static_cast<std::int64_t>(cfg_.events.size()) - 1))];
            through = pick_through(*target);
        }
        bool evening_target = target && target->start >= 12 * 60;
        if (through) {
            plan.info.home = evening_target ? through->second : through->first;
            plan.info.work = evening_target ? through->first : through->second;
        } else {
            std::tie(plan.info.home, plan.info.work) = random_od();
        }
        plan.morning = {plan.info.home, plan.info.work, 0.0, draw_jitter()};
        plan.evening = {plan.info.work, plan.info.home, 0.0, draw_jitter()};
        plan.morning.center = cfg_.fixed_morning_center.value_or(rng_.uniform(cfg_.morning_lo, cfg_.morning_hi));
        plan.evening.center = cfg_.fixed_evening_center.value_or(rng_.uniform(cfg_.evening_lo, cfg_.evening_hi));
        if (through) {
            // Put the habitual arrival at the delayed section inside the delay window.
            auto& p = evening_target ? plan.evening : plan.morning;
            double offset = spatial_overlap(route(p.origin, p.dest), *target, network_)->second;
            double at_section = rng_.uniform(target->start - 5.0, static_cast<double>(target->end));
            p.center = std::clamp(at_section - offset, kDayStart, kDayEnd);
        }
        plan.duration_offset = rng_.uniform(0.0, 4.0);

        std::size_t need = std::max({cfg_.screen.day_threshold, cfg_.screen.od_day_threshold, cfg_.cluster.min_pts}) + 2;
        plan.info.normal_days = static_cast<std::size_t>(
            rng_.uniform_int(static_cast<std::int64_t>(need), static_cast<std::int64_t>(normal_days_.size())));
        plan.travel_prob = static_cast<double>(plan.info.normal_days) / static_cast<double>(normal_days_.size());
        plan.info.morning_center = plan.morning.center;
        plan.info.evening_center = plan.evening.center;
        plan.info.morning_jitter = plan.morning.jitter;
        plan.info.evening_jitter = plan.evening.jitter;
        return plan;
    }

    std::int64_t planned_entry_seconds(const PlannedPattern& p) {
        double t = p.center + rng_.uniform(-p.jitter, p.jitter);
        return static_cast<std::int64_t>(std::llround(t * 60.0));
    }

    const std::string& op_for(const std::string& station) {
        auto [it, fresh] = ops_.try_emplace(station);
        if (fresh) it->second = network_.lines_at(*network_.find(station)).front();
        return it->second;
    }

    Trip emit_trip(const std::string& card, Date date, std::int64_t entry_sec, const std::string& o,
                   const std::string& d, double duration) {
        Trip t;
        t.card_id = card;
        t.origin = o;
        t.dest = d;
        t.entry_time = make_timestamp(date, static_cast<int>(entry_sec));
        t.exit_time = t.entry_time + std::chrono::seconds{std::max<std::int64_t>(60, std::llround(duration * 60.0))};
        records_.push_back({card, t.entry_time, TxnType::MetroEntry, op_for(o), o});
        records_.push_back({card, t.exit_time, TxnType::MetroExit, op_for(d), d});
        return t;
    }

    void emit_bus(const std::string& card, Date date, std::int64_t sec) {
        static const char* operators[] = {"Bus Group", "Eastern Bus", "Western Bus"};
        auto op = operators[rng_.uniform_int(0, 2)];
        auto type = rng_.bernoulli(0.5) ? TxnType::Bus : TxnType::BusQr;
        auto route_no = rng_.bernoulli(0.5) ? fmt::format("M{}", rng_.uniform_int(100, 499))
                                            : fmt::format("{}", rng_.uniform_int(1, 999));
        records_.push_back({card, make_timestamp(date, static_cast<int>(sec)), type, op, route_no});
    }

    double trip_duration(const RegularPlan& plan, const PlannedPattern& p) {
        return ride_minutes(p.origin, p.dest) + plan.duration_offset + rng_.uniform(-1.5, 1.5);
    }

    void emit_pattern_trip(const RegularPlan& plan, const PlannedPattern& p, Date date, bool normal_day) {
        auto entry = planned_entry_seconds(p);
        auto trip = emit_trip(plan.info.card_id, date, entry, p.origin, p.dest, trip_duration(plan, p));
        if (normal_day) normal_trips_[plan.info.card_id].push_back(std::move(trip));
    }

    void emit_normal_days(const RegularPlan& plan) {
        std::vector<std::size_t> idx(normal_days_.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng_.shuffle(idx);
        idx.resize(plan.info.normal_days);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) {
            emit_pattern_trip(plan, plan.morning, normal_days_[i], true);
            emit_pattern_trip(plan, plan.evening, normal_days_[i], true);
        }
    }

    void emit_casual(const std::string& card) {
        const auto& sc = cfg_.screen;
        bool frequent = rng_.bernoulli(0.5);
        std::vector<std::size_t> idx(weekdays_.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng_.shuffle(idx);
        auto trip_at = [&](Date date, const std::pair<std::string, std::string>& od) {
            auto entry = static_cast<std::int64_t>(std::llround(rng_.uniform(360.0, 1320.0) * 60.0));
            emit_trip(card, date, entry, od.first, od.second, ride_minutes(od.first, od.second) + rng_.uniform(0.0, 5.0));
        };

        if (!frequent || weekdays_.size() < sc.day_threshold + 2) {
            // Too few travel days.
            auto days = static_cast<std::size_t>(rng_.uniform_int(1, static_cast<std::int64_t>(
                                                                          std::min(sc.day_threshold - 2, weekdays_.size()))));
            std::vector<std::pair<std::string, std::string>> ods(static_cast<std::size_t>(rng_.uniform_int(1, 3)));
            for (auto& od : ods) od = random_od();
            for (std::size_t k = 0; k < days; ++k) {
                auto n_trips = rng_.uniform_int(1, 2);
                for (std::int64_t t = 0; t < n_trips; ++t)
                    trip_at(weekdays_[idx[k]], ods[static_cast<std::size_t>(
                                                   rng_.uniform_int(0, static_cast<std::int64_t>(ods.size()) - 1))]);
            }
        } else {
            // Frequent, but no OD pair repeats on enough days.
            auto days = static_cast<std::size_t>(rng_.uniform_int(static_cast<std::int64_t>(sc.day_threshold + 2),
                                                                  static_cast<std::int64_t>(weekdays_.size())));
            std::size_t cap = sc.od_day_threshold - 2;
            std::size_t n_ods = (days + cap - 1) / cap + static_cast<std::size_t>(rng_.uniform_int(1, 3));
            std::vector<std::pair<std::string, std::string>> ods;
            while (ods.size() < n_ods) {
                auto od = random_od();
                if (std::find(ods.begin(), ods.end(), od) == ods.end()) ods.push_back(od);
            }
            std::vector<std::size_t> used(n_ods, 0);
            for (std::size_t k = 0; k < days; ++k) {
                std::vector<std::size_t> open;
                for (std::size_t o = 0; o < n_ods; ++o)
                    if (used[o] < cap) open.push_back(o);
                auto pick = open[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(open.size()) - 1))];
                ++used[pick];
                trip_at(weekdays_[idx[k]], ods[pick]);
            }
        }
        if (rng_.bernoulli(0.3)) {
            auto n_bus = rng_.uniform_int(1, 5);
            for (std::int64_t b = 0; b < n_bus; ++b) {
                auto day = weekdays_[static_cast<std::size_t>(
                    rng_.uniform_int(0, static_cast<std::int64_t>(weekdays_.size()) - 1))];
                emit_bus(card, day, rng_.uniform_int(6 * 3600, 22 * 3600));
            }
        }
    }

    struct Group {
        std::string card;
        Date date;
        std::string pattern_key;
        std::vector<std::size_t> instances;
        const TravelPattern* pattern = nullptr;
        std::int64_t entry_sec = 0;
        bool started = false;
        double weight = 1.0;
        ChoiceLabel label = ChoiceLabel::Wait;
    };

    // Returns the planted label of every affected instance (same order).
    std::vector<ChoiceLabel> emit_event_days(const std::vector<RegularPlan>& plans, const GroundTruth& truth) {
        std::map<std::string, const TravelPattern*> pattern_by_key;
        for (const auto& p : truth.patterns) pattern_by_key[p.key] = &p;
        std::map<std::string, const RegularPlan*> plan_by_card;
        for (const auto& p : plans) plan_by_card[p.info.card_id] = &p;
        std::map<int, const DelayEvent*> event_by_id;
        for (const auto& e : cfg_.events) event_by_id[e.event_id] = &e;

        std::map<std::tuple<std::string, Date, std::string>, Group> groups;
        for (std::size_t i = 0; i < truth.affected.size(); ++i) {
            const auto& inst = truth.affected[i];
            const auto& ev = *event_by_id.at(inst.event_id);
            auto& g = groups[{inst.card_id, ev.date, inst.pattern_key}];
            g.card = inst.card_id;
            g.date = ev.date;
            g.pattern_key = inst.pattern_key;
            g.pattern = pattern_by_key.at(inst.pattern_key);
            g.instances.push_back(i);
        }

        // Planned entry and the resulting propensity weight.
        for (auto& [key, g] : groups) {
            const auto& plan = *plan_by_card.at(g.card);
            const auto& planned = g.pattern->origin == plan.morning.origin ? plan.morning : plan.evening;
            const auto& ev = *event_by_id.at(truth.affected[g.instances.front()].event_id);
            g.entry_sec = planned_entry_seconds(planned);
            double earliest = g.pattern->entry_mean - 3.0 * std::max(g.pattern->entry_std, 15.0);
            g.started = g.entry_sec <= ev.start * 60 && static_cast<double>(g.entry_sec) / 60.0 >= earliest;
            bool high = !g.started && delay_period(ev.start, cfg_.peaks) == DelayPeriod::MorningPeak &&
                        g.pattern->entry_std < cfg_.urgency_threshold;
            g.weight = high ? cfg_.high_propensity_weight : 1.0;
        }

        // Exactly round(rate * n) abandoners, chosen by weighted sampling without replacement.
        std::vector<std::pair<double, Group*>> keyed;
        for (auto& [key, g] : groups) {
            double u = std::max(rng_.uniform(), 1e-300);
            keyed.emplace_back(std::log(u) / g.weight, &g);
        }
        auto n_abandon = static_cast<std::size_t>(std::llround(cfg_.abandon_rate * static_cast<double>(keyed.size())));
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; k < keyed.size(); ++k)
            keyed[k].second->label = k < n_abandon ? ChoiceLabel::Abandon : ChoiceLabel::Wait;

        std::map<std::pair<std::string, Date>, std::vector<const Group*>> by_card_day;
        for (const auto& [key, g] : groups) by_card_day[{g.card, g.date}].push_back(&g);

        for (auto date : event_dates_) {
            for (const auto& plan : plans) {
                auto it = by_card_day.find({plan.info.card_id, date});
                if (it == by_card_day.end()) {
                    if (rng_.bernoulli(plan.travel_prob)) {
                        emit_pattern_trip(plan, plan.morning, date, false);
                        emit_pattern_trip(plan, plan.evening, date, false);
                    }
                    continue;
                }
                for (const auto* planned : {&plan.morning, &plan.evening}) {
                    const Group* g = nullptr;
                    for (const auto* cand : it->second)
                        if (cand->pattern->origin == planned->origin && cand->pattern->dest == planned->dest) g = cand;
                    if (!g) {
                        emit_pattern_trip(plan, *planned, date, false);
                        continue;
                    }
                    const auto& ev = *event_by_id.at(truth.affected[g->instances.front()].event_id);
                    auto shown = g->label;
                    if (cfg_.noise_rate > 0.0 && rng_.bernoulli(cfg_.noise_rate))
                        shown = shown == ChoiceLabel::Wait ? ChoiceLabel::Abandon : ChoiceLabel::Wait;
                    emit_delay_behavior(plan, *planned, *g, ev, shown);
                }
            }
        }

        std::vector<ChoiceLabel> labels(truth.affected.size(), ChoiceLabel::Wait);
        for (const auto& [key, g] : groups)
            for (auto i : g.instances) labels[i] = g.label;
        return labels;
    }

    void emit_delay_behavior(const RegularPlan& plan, const PlannedPattern& p, const Group& g, const DelayEvent& ev,
                             ChoiceLabel shown) {
        const auto& card = plan.info.card_id;
        if (shown == ChoiceLabel::Wait) {
            auto entry = g.entry_sec;
            if (!g.started)
                entry = std::min<std::int64_t>(entry, static_cast<std::int64_t>(ev.end + cfg_.label.slack_minutes - 1) * 60);
            double duration = trip_duration(plan, p);
            duration += rng_.uniform(5.0, 20.0);  // held by the delay
            emit_trip(card, g.date, entry, p.origin, p.dest, duration);
            return;
        }
        if (g.started) {
            // Tapped in, then left through the same gate while the line was stopped.
            auto ts_in = make_timestamp(g.date, static_cast<int>(g.entry_sec));
            std::int64_t lo = std::max<std::int64_t>(ev.start * 60, g.entry_sec + 60);
            std::int64_t hi = static_cast<std::int64_t>(ev.end) * 60;
            auto exit_sec = rng_.uniform_int(lo, std::max(lo, hi));
            records_.push_back({card, ts_in, TxnType::MetroEntry, op_for(p.origin), p.origin});
            records_.push_back({card, make_timestamp(g.date, static_cast<int>(exit_sec)), TxnType::MetroExit,
                                op_for(p.origin), p.origin});
        }
        if (rng_.bernoulli(cfg_.bus_tap_share)) {
            std::int64_t lo = static_cast<std::int64_t>(ev.start) * 60;
            std::int64_t hi = static_cast<std::int64_t>(ev.end + cfg_.label.slack_minutes) * 60;
            emit_bus(card, g.date, rng_.uniform_int(lo, hi));
        }
    }

    void fill_truth(World& world, const std::vector<RegularPlan>& plans, const std::vector<ChoiceLabel>& labels) {
        auto& truth = world.truth;
        for (const auto& plan : plans) {
            truth.regular_cards.push_back(plan.info.card_id);
            truth.planted.push_back(plan.info);
        }
        for (std::size_t j = 0; j < cfg_.casual_count; ++j) truth.casual_cards.push_back(card_ids_[cfg_.regular_count + j]);
        std::sort(truth.regular_cards.begin(), truth.regular_cards.end());
        std::sort(truth.casual_cards.begin(), truth.casual_cards.end());
        std::sort(truth.planted.begin(), truth.planted.end(),
                  [](const PlantedRegular& a, const PlantedRegular& b) { return a.card_id < b.card_id; });

        std::map<std::string, const TravelPattern*> pattern_by_key;
        for (const auto& p : truth.patterns) pattern_by_key[p.key] = &p;
        std::map<int, const DelayEvent*> event_by_id;
        for (const auto& e : cfg_.events) event_by_id[e.event_id] = &e;
        std::set<std::string> affected_cards;
        for (const auto& inst : truth.affected) affected_cards.insert(inst.card_id);
        std::map<std::pair<std::string, Date>, std::vector<AfcRecord>> day_records;
        for (const auto& r : world.records) {
            auto d = date_of(r.timestamp);
            if (event_dates_.contains(d) && affected_cards.contains(r.card_id)) day_records[{r.card_id, d}].push_back(r);
        }
        static const std::vector<AfcRecord> kNone;
        for (std::size_t i = 0; i < truth.affected.size(); ++i) {
            const auto& inst = truth.affected[i];
            const auto& ev = *event_by_id.at(inst.event_id);
            const auto& pattern = *pattern_by_key.at(inst.pattern_key);
            auto it = day_records.find({inst.card_id, ev.date});
            bool started = started_before_delay(it == day_records.end() ? kNone : it->second, pattern, ev);
            auto record = featurize(inst, pattern, ev, started, cfg_.peaks);
            record.label = labels[i];
            truth.labeled.push_back(std::move(record));
        }
    }

    std::string render_all_narratives() {
        Rng narrative_rng(cfg_.seed ^ 0x6e61727261746976ULL);
        std::string out;
        for (std::size_t i = 0; i < cfg_.events.size(); ++i) {
            if (i) out += "\n";
            out += render_narrative(cfg_.events[i], network_, static_cast<int>(i), narrative_rng) + "\n";
        }
        return out;
    }

    const WorldConfig& cfg_;
    Network network_;
    Rng rng_;
    Calendar calendar_;
    std::vector<Date> weekdays_;
    std::vector<Date> normal_days_;
    std::set<Date> event_dates_;
    std::vector<std::string> card_ids_;
    std::map<OdPair, Route> routes_;
    std::map<std::string, std::string> ops_;
    std::vector<AfcRecord> records_;
    std::map<std::string, std::vector<Trip>> normal_trips_;
};

}  // namespace

World generate_world(const WorldConfig& config) { return WorldBuilder(config).build(); }

}  // namespace delayptc
