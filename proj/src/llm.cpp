#include "delayptc/delay_log.hpp"
#include "delayptc/llm.hpp"
#include "delayptc/predictor.hpp"

#include <spdlog/spdlog.h>

namespace delayptc {

namespace {

// Rebuilds the network from the "Lines and stations" listing of an extraction prompt.
std::optional<Network> network_from_prompt(std::string_view prompt) {
    std::vector<LineDef> defs;
    bool in_listing = false;
    for (const auto& raw : split(prompt, '\n')) {
        if (raw.starts_with("Lines and stations")) {
            in_listing = true;
            continue;
        }
        if (!in_listing) continue;
        if (trim(raw).empty()) break;
        auto colon = raw.find(": ");
        if (colon == std::string::npos) return std::nullopt;
        LineDef def{raw.substr(0, colon), {}, std::nullopt};
        std::string_view rest = std::string_view(raw).substr(colon + 2);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            auto comma = rest.find(", ", pos);
            auto end = comma == std::string_view::npos ? rest.size() : comma;
            def.stations.emplace_back(rest.substr(pos, end - pos));
            if (comma == std::string_view::npos) break;
            pos = comma + 2;
        }
        defs.push_back(std::move(def));
    }
    try {
        return Network::build(defs);
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string narrative_from_prompt(std::string_view prompt) {
    auto open = prompt.find("<<<\n");
    auto close = prompt.rfind("\n>>>");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open + 4) return {};
    return std::string(prompt.substr(open + 4, close - open - 4));
}

std::string mock_extraction_reply(std::string_view prompt) {
    auto network = network_from_prompt(prompt);
    if (!network) return "UNABLE: network listing missing";
    try {
        auto result = extract_from_log(narrative_from_prompt(prompt), *network);
        return format_extraction_reply(result.event);
    } catch (const Error& e) {
        return std::string("UNABLE: ") + e.code();
    }
}

}  // namespace

std::unique_ptr<LlmBackend> make_rule_mock_backend(const MockRuleParams& params) {
    return std::make_unique<MockBackend>("mock-rule", [params](const LlmRequest& request) -> std::string {
        if (request.user.starts_with("### Task: delay-extraction")) return mock_extraction_reply(request.user);
        if (request.user.starts_with("### Task: choice-prediction")) return mock_choice_reply(request.user, params);
        spdlog::warn("mock backend received an unknown prompt kind");
        return "UNABLE: unknown task";
    });
}

}  // namespace delayptc
