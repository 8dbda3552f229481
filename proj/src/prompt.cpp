#include "delayptc/predictor.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <regex>
#include <set>

namespace delayptc {

std::string format_predictions_jsonl(const std::vector<Prediction>& predictions) {
    std::string out;
    for (const auto& p : predictions) {
        nlohmann::ordered_json j;
        j["card_id"] = p.key.card_id;
        j["event_id"] = p.key.event_id;
        j["label"] = p.label ? std::string(to_string(*p.label)) : std::string("Unresolved");
        j["backend"] = p.backend;
        j["rationale"] = p.rationale;
        j["retry_count"] = p.retry_count;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<Prediction> parse_predictions_jsonl(std::string_view text) {
    std::vector<Prediction> out;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Prediction p;
            p.key = {j.at("card_id").get<std::string>(), j.at("event_id").get<int>()};
            p.label = parse_choice_label(j.at("label").get<std::string>());
            p.backend = j.value("backend", "");
            p.rationale = j.value("rationale", "");
            p.retry_count = j.value("retry_count", 0);
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed-prediction-file", e.what());
        }
    }
    return out;
}

namespace {

const char* kFeatureGlossary =
    "- delay_type (v1): cause category of the delay: VehicleFault, SignalingFault, PowerFault, "
    "ImproperOperation or Others.\n"
    "- delay_period (v2): time-of-day bucket of the delay start: MorningPeak, EveningPeak or OffPeak.\n"
    "- trip_duration (p1): mean minutes from entry tap to exit tap over the passenger's trips in this "
    "travel pattern.\n"
    "- started_before_delay (p2): true if the passenger had already tapped in for this trip when the delay "
    "began.\n"
    "- urgency (p3): standard deviation of the passenger's entry times for this pattern, in minutes. A "
    "smaller standard deviation means a more rigid schedule, so the trip is more likely to be urgent.\n";

}  // namespace

std::string serialize_case(const ChoiceRecord& r) {
    return fmt::format("delay_type={}; delay_period={}; trip_duration={} min; started_before_delay={}; urgency={} min",
                       to_string(r.v1), to_string(r.v2), format_decimal(r.p1, 2), r.p2 ? "true" : "false",
                       format_decimal(r.p3, 2));
}

PromptBundle build_prompt(const std::vector<ChoiceRecord>& records, const DelayEvent& event,
                          const PromptTemplate& tmpl) {
    if (records.empty()) throw Error("empty-batch", "prompt needs at least one case");
    if (records.size() > tmpl.max_cases)
        throw Error("oversized-batch", fmt::format("{} cases exceed the limit of {}", records.size(), tmpl.max_cases));
    PromptBundle b;
    b.system_preamble = tmpl.system_preamble;
    b.dataset_description = tmpl.dataset_description;
    b.feature_glossary = kFeatureGlossary;
    b.event_summary = fmt::format("Event {} on {}, {}, {}-{}. Delay type {}. Affected interval {} - {}, {} direction.",
                                  event.event_id, event.line, format_date(event.date), format_hhmm(event.start),
                                  format_hhmm(event.end), to_string(event.delay_type), event.from_station,
                                  event.to_station, to_string(event.direction));
    b.task_description = tmpl.task_description;
    b.cot_questions.assign(tmpl.cot_questions.begin(), tmpl.cot_questions.end());
    for (const auto& r : records) {
        b.cases.push_back(serialize_case(r));
        b.keys.push_back(r.key());
    }
    b.output_format_instruction = tmpl.output_format_instruction;
    return b;
}

std::string PromptBundle::render() const {
    std::string out = "### Task: choice-prediction\n\n";
    out += "## Dataset description\n" + dataset_description + "\n\n";
    out += "## Features\n" + feature_glossary + "\n";
    out += "## Delay event\n" + event_summary + "\n\n";
    out += "## Prediction task\n" + task_description + "\n\n";
    out += "## Reasoning steps\nWork through these sub-questions for each case before answering.\n";
    for (std::size_t i = 0; i < cot_questions.size(); ++i)
        out += fmt::format("Sub-question {}: {}\n", i + 1, cot_questions[i]);
    out += "\n## Cases\n";
    for (std::size_t i = 0; i < cases.size(); ++i) out += fmt::format("Case {}: {}\n", i + 1, cases[i]);
    out += "\n## Output format\n" + output_format_instruction + "\n";
    return out;
}

std::map<int, ParsedCase> parse_choice_reply(std::string_view reply_view, bool expect_single) {
    static const std::regex case_re(R"(case\s*#?\s*(\d+))", std::regex::icase);
    static const std::regex choice_re(R"(choice\s*\**\s*[:=]\s*\**\s*(wait|abandon)\b)", std::regex::icase);
    static const std::regex reason_re(R"(reason\s*\**\s*[:=]\s*\**\s*([^\n]*))", std::regex::icase);

    std::string reply(reply_view);
    std::vector<std::pair<std::size_t, int>> markers;
    for (auto it = std::sregex_iterator(reply.begin(), reply.end(), case_re); it != std::sregex_iterator(); ++it)
        markers.emplace_back(static_cast<std::size_t>(it->position(0)), std::stoi((*it)[1]));

    std::map<int, ParsedCase> out;
    auto parse_block = [&](const std::string& block, int n) {
        std::smatch m;
        if (!std::regex_search(block, m, choice_re)) return;
        ParsedCase pc{to_lower(m[1].str()) == "abandon" ? ChoiceLabel::Abandon : ChoiceLabel::Wait, ""};
        if (std::regex_search(block, m, reason_re)) pc.reason = trim(m[1].str());
        out.try_emplace(n, std::move(pc));
    };
    if (markers.empty()) {
        if (expect_single) parse_block(reply, 1);
        return out;
    }
    for (std::size_t k = 0; k < markers.size(); ++k) {
        auto begin = markers[k].first;
        auto end = k + 1 < markers.size() ? markers[k + 1].first : reply.size();
        parse_block(reply.substr(begin, end - begin), markers[k].second);
    }
    return out;
}

std::vector<Prediction> run_llm_predictor(LlmBackend& backend, const PromptBundle& bundle,
                                          std::uint64_t request_base) {
    const int budget = backend.limits().retry_budget;
    const int n_cases = static_cast<int>(bundle.cases.size());
    std::vector<Prediction> out(bundle.cases.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].key = bundle.keys[i];
        out[i].backend = backend.id();
    }

    std::set<int> pending;
    for (int n = 1; n <= n_cases; ++n) pending.insert(n);
    LlmRequest request;
    request.system = bundle.system_preamble;
    request.user = bundle.render();
    bool last_was_transport = false;
    for (int attempt = 0; attempt <= budget && !pending.empty(); ++attempt) {
        request.id = request_base + static_cast<std::uint64_t>(attempt);
        std::string reply;
        try {
            reply = backend.complete(request);
            last_was_transport = false;
        } catch (const TransportError& e) {
            spdlog::warn("request {} failed: {}", request.id, e.what());
            last_was_transport = true;
            continue;
        }
        auto parsed = parse_choice_reply(reply, n_cases == 1);
        for (auto it = pending.begin(); it != pending.end();) {
            auto found = parsed.find(*it);
            if (found == parsed.end()) {
                ++it;
                continue;
            }
            auto& p = out[static_cast<std::size_t>(*it - 1)];
            p.label = found->second.label;
            p.rationale = found->second.reason;
            p.retry_count = attempt;
            it = pending.erase(it);
        }
        if (pending.empty()) break;
        std::string missing;
        for (int n : pending) missing += (missing.empty() ? "" : ", ") + std::to_string(n);
        request.user = bundle.render() +
                       fmt::format("\n## Reformat instruction\nYour previous answer could not be parsed for case(s) "
                                   "{}. Reply ONLY with these blocks, exactly:\nCase <n>: CHOICE: WAIT or ABANDON\n"
                                   "REASON: <one sentence>\n",
                                   missing);
    }
    if (!pending.empty()) {
        std::string keys;
        for (int n : pending) {
            const auto& k = bundle.keys[static_cast<std::size_t>(n - 1)];
            keys += fmt::format("{}{}/{}", keys.empty() ? "" : ", ", k.card_id, k.event_id);
        }
        if (last_was_transport) throw Error("batch-failed", "transport failed for " + keys);
        spdlog::warn("unresolved after {} retries: {}", budget, keys);
        for (int n : pending) out[static_cast<std::size_t>(n - 1)].retry_count = budget;
    }
    return out;
}

std::vector<Prediction> run_llm_batches(LlmBackend& backend, const std::vector<PromptBundle>& bundles) {
    auto per_bundle = run_bounded<std::vector<Prediction>>(
        bundles.size(), backend.limits().max_in_flight, [&](std::size_t i) {
            return run_llm_predictor(backend, bundles[i], static_cast<std::uint64_t>(i) * 1000);
        });
    std::vector<Prediction> out;
    for (auto& v : per_bundle) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::string mock_choice_reply(std::string_view prompt_text, const MockRuleParams& params) {
    static const std::regex case_re(
        R"(^Case (\d+): delay_type=(\w+); delay_period=(\w+); trip_duration=([0-9.]+) min; started_before_delay=(true|false); urgency=([0-9.]+) min$)");
    std::string reply;
    for (const auto& line : split(prompt_text, '\n')) {
        std::smatch m;
        if (!std::regex_match(line, m, case_re)) continue;
        bool started = m[5] == "true";
        bool morning = m[3] == "MorningPeak";
        double p3 = std::stod(m[6]);
        bool abandon = !started && morning && p3 < params.urgency_threshold;
        std::string reason =
            abandon ? fmt::format("not yet in the system during a morning-peak delay and a rigid schedule ({} min)", m[6].str())
                    : started ? "already started the trip, so staying with the metro is cheaper"
                              : "schedule flexibility or period makes waiting acceptable";
        reply += fmt::format("Case {}: CHOICE: {}\nREASON: {}\n", m[1].str(), abandon ? "ABANDON" : "WAIT", reason);
    }
    return reply;
}

}  // namespace delayptc
