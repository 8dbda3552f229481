#include "delayptc/delay_log.hpp"
#include "delayptc/llm.hpp"
#include "delayptc/synth.hpp"

#include <gtest/gtest.h>

using namespace delayptc;

namespace {

const Network& network() {
    static const Network net = Network::build(shenzhen_lines());
    return net;
}

DelayEvent event_12() {
    return {12, "Line 5", DelayType::Others, *parse_date("2019-08-20"), 7 * 60 + 50, 8 * 60 + 36, "Minzhi",
            "Qianwan Park", Direction::Down};
}

}  // namespace

TEST(DelayTable, ReferenceTableParsesWithFillDown) {
    auto result = parse_structured_delays(read_file(std::string(DELAYPTC_DATA_DIR) + "/delays.tsv"), &network());
    EXPECT_TRUE(result.rejected.empty());
    ASSERT_EQ(result.events.size(), 14u);
    EXPECT_EQ(result.events, recorded_delays());
    EXPECT_EQ(result.events[1].line, "Line 1");
    EXPECT_EQ(result.events[1].delay_type, DelayType::VehicleFault);
    EXPECT_EQ(result.events[11], event_12());
    EXPECT_EQ(result.events[13].from_station, "Bihaiwan");
}

TEST(DelayTable, FormatRoundTrips) {
    auto events = recorded_delays();
    auto text = format_delay_table(events);
    auto back = parse_structured_delays(text, &network());
    EXPECT_TRUE(back.rejected.empty());
    EXPECT_EQ(back.events, events);
}

TEST(DelayTable, RejectsBadRows) {
    auto text =
        "Line\tDelay type\tNo.\tDate\tTime\tDelay interval\tDirection\n"
        "Line 1\tVehicle Fault\t1\t2019-08-27\t09:09-08:10\tTaoyuan-Luohu\tUp\n"
        "Line 1\tVehicle Fault\t2\t2019-08-27\t08:10-09:09\tTaoyuan-Atlantis\tUp\n"
        "Line 1\tVehicle Fault\t3\t2019-08-27\t08:10-09:09\tTaoyuan-Luohu\tSideways\n"
        "Line 1\tMeteor\t4\t2019-08-27\t08:10-09:09\tTaoyuan-Luohu\tUp\n"
        "Line 1\tVehicle Fault\t5\t2019-08-27\t08:10-09:09\tTaoyuan-Luohu\tUp\n";
    auto r = parse_structured_delays(text, &network());
    EXPECT_EQ(r.rejected.size(), 4u);
    ASSERT_EQ(r.events.size(), 1u);
    EXPECT_EQ(r.events[0].event_id, 5);
}

TEST(DelayEvents, JsonlRoundTrip) {
    auto events = recorded_delays();
    auto text = format_events_jsonl(events);
    EXPECT_EQ(parse_events_jsonl(text), events);
}

TEST(Validation, FlagsImpossibleEvents) {
    auto e = event_12();
    EXPECT_FALSE(validate_event(e, &network()));
    auto reversed = e;
    reversed.end = reversed.start;
    EXPECT_TRUE(validate_event(reversed, &network()));
    auto off_line = e;
    off_line.to_station = "Luohu";
    EXPECT_TRUE(validate_event(off_line, &network()));
}

class TemplateRoundTrip : public ::testing::TestWithParam<int> {};

TEST_P(TemplateRoundTrip, EveryRecordedDelayIsRecovered) {
    Rng rng(99);
    for (const auto& e : recorded_delays()) {
        auto text = render_narrative(e, network(), GetParam(), rng);
        auto r = extract_from_log(text, network());
        EXPECT_EQ(r.event, e) << text;
        EXPECT_TRUE(r.flags.empty()) << text;
    }
}

INSTANTIATE_TEST_SUITE_P(Templates, TemplateRoundTrip, ::testing::Range(0, kNarrativeTemplateCount));

TEST(Extraction, IncidentStyleLogFallsBackToResolutionTime) {
    auto text = read_file(std::string(DELAYPTC_DATA_DIR) + "/delay_logs.txt");
    auto r = extract_from_log(text, network(), {ExtractionBackend::Rule, nullptr, 12});
    auto want = event_12();
    EXPECT_EQ(r.event.line, want.line);
    EXPECT_EQ(r.event.date, want.date);
    EXPECT_EQ(r.event.start, want.start);
    EXPECT_EQ(r.event.direction, want.direction);
    EXPECT_EQ(r.event.delay_type, want.delay_type);
    EXPECT_EQ(r.event.from_station, "Minzhi");
    EXPECT_EQ(r.event.to_station, "Qianwan Park");
    EXPECT_EQ(r.event.event_id, 12);
    EXPECT_EQ(r.event.end, 7 * 60 + 55);
    EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "end-from-resolution"), r.flags.end());
    EXPECT_LT(r.confidence, 1.0);
}

TEST(Extraction, FailuresCarryCodes) {
    auto expect_code = [](const std::string& text, const std::string& code) {
        try {
            extract_from_log(text, network());
            ADD_FAILURE() << "no error for: " << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), code) << text;
        }
    };
    expect_code("The weather was pleasant.", "no-event-found");
    expect_code("On August 20, 2019, at 7:50 AM a signal fault hit the up line of Line 5 between Xili and Buji.",
                "no-end-time");
    expect_code("On August 20, 2019, at 7:50 AM a signal fault hit Line 5 between Xili and Buji. Service was "
                "restored at 8:20 AM.",
                "no-direction");
}

TEST(Extraction, LlmBackendUsesConstrainedReply) {
    auto backend = make_rule_mock_backend();
    Rng rng(3);
    auto e = recorded_delays()[6];
    auto text = render_narrative(e, network(), 1, rng);
    auto r = extract_from_log(text, network(), {ExtractionBackend::Llm, backend.get(), {}});
    EXPECT_EQ(r.event, e);
    EXPECT_EQ(r.provenance.at("line"), Provenance::Llm);

    MockBackend garbage("garbage", [](const LlmRequest&) { return std::string("I cannot help with that."); });
    try {
        extract_from_log(text, network(), {ExtractionBackend::Llm, &garbage, {}});
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), "unparseable-llm-reply");
    }
}

TEST(Extraction, PromptFencesNarrative) {
    auto prompt = render_extraction_prompt("Something happened.", network());
    EXPECT_NE(prompt.find("<<<\nSomething happened.\n>>>"), std::string::npos);
    EXPECT_NE(prompt.find("Line 11: Futian, Chegongmiao"), std::string::npos);
}

TEST(Narratives, SplitOnBlankLines) {
    auto parts = split_narratives("one\nstill one\n\n\n two \n\n");
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_EQ(parts[0], "one still one");
    EXPECT_EQ(parts[1], "two");
}
