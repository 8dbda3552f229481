#include "delayptc/impact.hpp"
#include "delayptc/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace delayptc;

namespace {

const Network& network() {
    static const Network net = Network::build(shenzhen_lines());
    return net;
}

TravelPattern pattern(const std::string& o, const std::string& d, double mean, double std, const std::string& card = "c") {
    TravelPattern p;
    p.card_id = card;
    p.origin = o;
    p.dest = d;
    p.entry_mean = mean;
    p.entry_std = std;
    p.mean_duration = 30;
    p.key = card + "#0";
    return p;
}

DelayEvent event1() { return recorded_delays()[0]; }  // Line 1 Up, Taoyuan-Luohu, 08:10-09:09

}  // namespace

TEST(Overlap, RideThroughIsAffected) {
    // Daxin -> Shenzhen University rides Taoyuan -> Shenzhen University up-bound.
    auto inst = is_affected(pattern("Daxin", "Shenzhen University", 8 * 60, 3), event1(), network());
    ASSERT_TRUE(inst);
    EXPECT_EQ(inst->overlap.stations, (std::vector<std::string>{"Taoyuan", "Shenzhen University"}));
    EXPECT_DOUBLE_EQ(inst->overlap.segment_entry, 8 * 60 + 5 + 2.5);
}

TEST(Overlap, OppositeDirectionAndEndpointContactAreNot) {
    EXPECT_FALSE(is_affected(pattern("Shenzhen University", "Daxin", 8 * 60 + 30, 3), event1(), network()));
    EXPECT_FALSE(is_affected(pattern("Daxin", "Taoyuan", 8 * 60 + 30, 3), event1(), network()));
    EXPECT_FALSE(is_affected(pattern("Luohu", "Guomao", 8 * 60 + 30, 3), event1(), network()));
}

TEST(Overlap, WindowPadIsHonouredAtTheBoundary) {
    // Arrival at Taoyuan = mean + 7.5; window [mean + 7.5 - std - 10, mean + 7.5 + std + 10].
    double just_in = 8 * 60 + 10 - 7.5 - 2 - 10;
    EXPECT_TRUE(is_affected(pattern("Daxin", "Luohu", just_in, 2), event1(), network()));
    EXPECT_FALSE(is_affected(pattern("Daxin", "Luohu", just_in - 0.01, 2), event1(), network()));
    EXPECT_FALSE(is_affected(pattern("Daxin", "Luohu", just_in - 0.01, 2), event1(), network(), {10.0}));
    EXPECT_TRUE(is_affected(pattern("Daxin", "Luohu", just_in - 0.01, 2), event1(), network(), {10.02}));
    double late = 9 * 60 + 9 - 7.5 + 2 + 10;
    EXPECT_TRUE(is_affected(pattern("Daxin", "Luohu", late, 2), event1(), network()));
    EXPECT_FALSE(is_affected(pattern("Daxin", "Luohu", late + 0.01, 2), event1(), network()));
}

TEST(Overlap, TransferIntoTheIntervalUsesTheRouteOffset) {
    // Line 5 rider transferring at Qianhaiwan onto Line 1 up-bound toward Luohu.
    auto inst = is_affected(pattern("Linhai", "Shenzhen University", 8 * 60, 1), event1(), network());
    ASSERT_TRUE(inst);
    EXPECT_EQ(inst->overlap.stations.front(), "Taoyuan");
}

TEST(Overlap, MatchesBruteForceOracle) {
    const auto& net = network();
    auto events = recorded_delays();
    Rng rng(2024);
    std::vector<TravelPattern> patterns;
    for (int i = 0; i < 1500; ++i) {
        auto o = rng.uniform_int(0, static_cast<std::int64_t>(net.stations().size()) - 1);
        auto d = rng.uniform_int(0, static_cast<std::int64_t>(net.stations().size()) - 1);
        double mean = std::round(rng.uniform(360, 1260) * 4) / 4;
        double std = std::round(rng.uniform(0, 25) * 4) / 4;
        auto card = "c" + std::to_string(i / 2);
        auto p = pattern(net.stations()[static_cast<std::size_t>(o)].name,
                         net.stations()[static_cast<std::size_t>(d)].name, mean, std, card);
        p.key = card + "#" + std::to_string(i % 2);
        patterns.push_back(p);
    }
    std::size_t positives = 0;
    for (const auto& e : events)
        for (const auto& p : patterns) {
            bool want = oracle::affected(p, e, net, 10.0);
            positives += want;
            ASSERT_EQ(is_affected(p, e, net).has_value(), want) << p.origin << " -> " << p.dest << " event " << e.event_id;
        }
    EXPECT_GT(positives, 50u);
    EXPECT_EQ(oracle::as_map(find_affected(patterns, events, net)), oracle::affected_set(patterns, events, net, 10.0));
}

TEST(Overlap, OneInstancePerCardKeepsEarliestPattern) {
    auto a = pattern("Daxin", "Luohu", 8 * 60 + 20, 3, "x");
    a.key = "x#1";
    auto b = pattern("Daxin", "Grand Theater", 8 * 60 + 5, 3, "x");
    b.key = "x#0";
    auto out = find_affected({a, b}, {event1()}, network());
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].pattern_key, "x#0");
    EXPECT_EQ(parse_affected_jsonl(format_affected_jsonl(out))[0].overlap.stations, out[0].overlap.stations);
}

TEST(StartedBeforeDelay, WindowIsEntryAtOriginBeforeStart) {
    auto p = pattern("Daxin", "Luohu", 8 * 60, 4);
    auto e = event1();
    auto tap = [&](int minute, const std::string& where, TxnType type = TxnType::MetroEntry) {
        return AfcRecord{"c", make_timestamp(e.date, minute * 60), type, "Line 1", where};
    };
    EXPECT_TRUE(started_before_delay({tap(8 * 60 + 10, "Daxin")}, p, e));
    EXPECT_FALSE(started_before_delay({tap(8 * 60 + 11, "Daxin")}, p, e));
    EXPECT_TRUE(started_before_delay({tap(8 * 60 - 45, "Daxin")}, p, e));
    EXPECT_FALSE(started_before_delay({tap(8 * 60 - 46, "Daxin")}, p, e));
    EXPECT_FALSE(started_before_delay({tap(8 * 60, "Taoyuan")}, p, e));
    EXPECT_FALSE(started_before_delay({tap(8 * 60, "Daxin", TxnType::MetroExit)}, p, e));
}
