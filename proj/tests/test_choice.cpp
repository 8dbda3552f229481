#include "delayptc/choice.hpp"

#include <gtest/gtest.h>

using namespace delayptc;

namespace {

DelayEvent event() {
    return {9, "Line 5", DelayType::ImproperOperation, *parse_date("2019-08-20"), 7 * 60 + 54, 9 * 60 + 14,
            "Bao'an Center", "Huangbei Ling", Direction::Up};
}

TravelPattern habit() {
    TravelPattern p;
    p.card_id = "c";
    p.origin = "Bao'an Center";
    p.dest = "Xili";
    p.entry_mean = 8 * 60;
    p.entry_std = 5;
    p.mean_duration = 24;
    p.key = "c#0";
    return p;
}

Trip trip(int entry_min, int exit_min, const std::string& o = "Bao'an Center", const std::string& d = "Xili") {
    auto date = event().date;
    return {"c", o, make_timestamp(date, entry_min * 60), d, make_timestamp(date, exit_min * 60), o == d};
}

AfcRecord bus(int minute) { return {"c", make_timestamp(event().date, minute * 60), TxnType::Bus, "Bus Group", "M1"}; }

}  // namespace

TEST(DelayPeriod, HalfOpenWindows) {
    EXPECT_EQ(delay_period(419), DelayPeriod::OffPeak);
    EXPECT_EQ(delay_period(420), DelayPeriod::MorningPeak);
    EXPECT_EQ(delay_period(569), DelayPeriod::MorningPeak);
    EXPECT_EQ(delay_period(570), DelayPeriod::OffPeak);
    EXPECT_EQ(delay_period(1020), DelayPeriod::EveningPeak);
    EXPECT_EQ(delay_period(1170), DelayPeriod::OffPeak);
    EXPECT_EQ(delay_period(600, {540, 660, 1000, 1100}), DelayPeriod::MorningPeak);
}

TEST(Labeling, CompletedTripMeansWait) {
    auto out = label_choice({trip(9 * 60 + 30, 9 * 60 + 58)}, {}, habit(), event());
    EXPECT_EQ(out.label, ChoiceLabel::Wait);
    EXPECT_FALSE(out.conflict);
}

TEST(Labeling, WindowEdges) {
    // lo = 480 - 15 - 60 = 405, hi = 554 + 60 = 614
    EXPECT_EQ(label_choice({trip(405, 430)}, {}, habit(), event()).label, ChoiceLabel::Wait);
    EXPECT_EQ(label_choice({trip(404, 430)}, {}, habit(), event()).label, ChoiceLabel::Abandon);
    EXPECT_EQ(label_choice({trip(614, 640)}, {}, habit(), event()).label, ChoiceLabel::Wait);
    EXPECT_EQ(label_choice({trip(615, 640)}, {}, habit(), event()).label, ChoiceLabel::Abandon);
    EXPECT_EQ(label_choice({trip(615, 640)}, {}, habit(), event(), {61}).label, ChoiceLabel::Wait);
}

TEST(Labeling, OtherOdDoesNotCount) {
    EXPECT_EQ(label_choice({trip(500, 530, "Bao'an Center", "Buji")}, {}, habit(), event()).label,
              ChoiceLabel::Abandon);
    EXPECT_EQ(label_choice({}, {}, habit(), event()).label, ChoiceLabel::Abandon);
}

TEST(Labeling, SameStationExitThenLaterTripIsWait) {
    auto out = label_choice({trip(480, 485, "Bao'an Center", "Bao'an Center"), trip(560, 590)}, {}, habit(), event());
    EXPECT_TRUE(out.conflict);
    EXPECT_EQ(out.label, ChoiceLabel::Wait);
}

TEST(Labeling, TripThenSameStationExitIsAbandon) {
    auto out = label_choice({trip(470, 471), trip(480, 485, "Bao'an Center", "Bao'an Center")}, {}, habit(), event());
    EXPECT_TRUE(out.conflict);
    EXPECT_EQ(out.label, ChoiceLabel::Abandon);
}

TEST(Labeling, BusTapCorroborates) {
    EXPECT_TRUE(label_choice({}, {bus(500)}, habit(), event()).corroborated);
    EXPECT_TRUE(label_choice({}, {bus(614)}, habit(), event()).corroborated);
    EXPECT_FALSE(label_choice({}, {bus(615)}, habit(), event()).corroborated);
    EXPECT_FALSE(label_choice({}, {bus(473)}, habit(), event()).corroborated);
}

TEST(Urgency, PopulationStd) {
    std::vector<double> v{470, 480, 490};
    EXPECT_NEAR(urgency(v), std::sqrt(200.0 / 3.0), 1e-12);
    EXPECT_EQ(urgency(std::vector<double>{480}), 0.0);
}

TEST(Featurize, UsesOnlyHabitAndEvent) {
    AffectedInstance inst{"c", "c#0", 9, {}};
    auto r = featurize(inst, habit(), event(), true);
    EXPECT_EQ(r.v1, DelayType::ImproperOperation);
    EXPECT_EQ(r.v2, DelayPeriod::MorningPeak);
    EXPECT_DOUBLE_EQ(r.p1, 24);
    EXPECT_TRUE(r.p2);
    EXPECT_DOUBLE_EQ(r.p3, 5);
    EXPECT_FALSE(r.label);
}

TEST(Dataset, RoundTrip) {
    std::vector<ChoiceRecord> rows(2);
    rows[0] = {"a", 1, DelayType::VehicleFault, DelayPeriod::MorningPeak, 23.5, true, 4.25, ChoiceLabel::Wait};
    rows[1] = {"b", 3, DelayType::Others, DelayPeriod::OffPeak, 41, false, 12.125, std::nullopt};
    auto text = format_dataset(rows);
    auto back = parse_dataset(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].label, ChoiceLabel::Wait);
    EXPECT_FALSE(back[1].label);
    EXPECT_DOUBLE_EQ(back[1].p3, 12.125);
    EXPECT_EQ(format_dataset(back), text);
    EXPECT_THROW(parse_dataset("header\nbad\trow\n"), Error);
}
