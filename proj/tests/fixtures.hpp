#pragma once
// Shared inputs for the prompt golden files.

#include "delayptc/choice.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fixtures {

inline delayptc::DelayEvent event12() {
    using namespace delayptc;
    return {12, "Line 5", DelayType::Others, *parse_date("2019-08-20"), 7 * 60 + 50, 8 * 60 + 36, "Minzhi",
            "Qianwan Park", Direction::Down};
}

inline delayptc::ChoiceRecord rec(const std::string& card, delayptc::DelayPeriod period, double p1, bool p2, double p3,
                                  std::optional<delayptc::ChoiceLabel> label = std::nullopt) {
    return {card, 12, delayptc::DelayType::Others, period, p1, p2, p3, label};
}

inline std::vector<delayptc::ChoiceRecord> batch() {
    using delayptc::ChoiceLabel;
    using delayptc::DelayPeriod;
    return {rec("300000011", DelayPeriod::MorningPeak, 31.25, false, 2.5, ChoiceLabel::Abandon),
            rec("300000018", DelayPeriod::MorningPeak, 44.0, true, 3.1, ChoiceLabel::Wait),
            rec("300000025", DelayPeriod::MorningPeak, 18.6667, false, 11.75, ChoiceLabel::Wait)};
}

inline constexpr const char* kGoldenPrompt = "choice_prompt_event12.txt";
inline constexpr const char* kGoldenSystem = "choice_prompt_system.txt";

}  // namespace fixtures
