#pragma once

#include "delayptc/choice.hpp"
#include "delayptc/delay_log.hpp"
#include "delayptc/llm.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

struct Prediction {
    RecordKey key;
    std::optional<ChoiceLabel> label;  // empty = Unresolved
    std::string rationale;
    std::string backend;
    int retry_count = 0;
};

std::string format_predictions_jsonl(const std::vector<Prediction>& predictions);
std::vector<Prediction> parse_predictions_jsonl(std::string_view text);

// Prompt construction for the chain-of-thought choice predictor.

struct PromptTemplate {
    std::string system_preamble =
        "You are a member of the operations staff of an urban rail transit (URT) system. Your job is to "
        "anticipate how regular passengers respond when a train delay disrupts their usual metro trip.";
    std::string dataset_description =
        "Each case is one regular passenger whose habitual metro trip overlaps a recorded train delay in "
        "space and time. Features come from the delay log and from the passenger's historical "
        "fare-collection records on normal weekdays.";
    std::string task_description =
        "For every case, predict whether the passenger WAITs (stays with the metro, possibly departing "
        "later, and completes the usual trip) or ABANDONs the metro for another mode of transport. Weigh "
        "the passenger's own travel habits together with the delay event.";
    std::array<std::string, 3> cot_questions = {
        "How severely does this delay intersect the passenger's planned trip in space and time, given "
        "the delay type and the delay period?",
        "How urgent or inflexible is this passenger, judging from the entry-time standard deviation "
        "(urgency) and the usual trip duration?",
        "Given whether the passenger had already started the trip and when the delay happened, is "
        "waiting cheaper for this passenger than switching to another mode?"};
    std::string output_format_instruction =
        "Answer each case in order using exactly this format, one block per case:\n"
        "Case <n>: CHOICE: WAIT|ABANDON\n"
        "REASON: <one sentence that follows the three sub-questions>";
    std::size_t max_cases = 10;
};

struct PromptBundle {
    std::string system_preamble;
    std::string dataset_description;
    std::string feature_glossary;
    std::string event_summary;
    std::string task_description;
    std::vector<std::string> cot_questions;  // exactly 3
    std::vector<std::string> cases;          // case n is cases[n - 1]
    std::vector<RecordKey> keys;             // parallel to cases
    std::string output_format_instruction;

    /// User-message text. The system preamble is sent separately.
    std::string render() const;
};

/// Deterministic rendering; labels never reach the prompt. Throws Error with
/// code empty-batch or oversized-batch.
PromptBundle build_prompt(const std::vector<ChoiceRecord>& records, const DelayEvent& event,
                          const PromptTemplate& tmpl = {});

/// Case text as it appears in a prompt (without the "Case n:" prefix).
std::string serialize_case(const ChoiceRecord& record);

struct ParsedCase {
    ChoiceLabel label;
    std::string reason;
};

/// Tolerant reply parser: finds "Case <n>" blocks and a "CHOICE: WAIT|ABANDON"
/// inside each, ignoring surrounding prose. A reply without case markers is
/// read as case 1 when expect_single is set.
std::map<int, ParsedCase> parse_choice_reply(std::string_view reply, bool expect_single = false);

/// Sends the bundle, retrying malformed cases with a stricter reformat
/// instruction up to the backend's retry budget. Cases still malformed come
/// back Unresolved. Throws Error("batch-failed") when the transport keeps
/// failing, listing the unresolved keys.
std::vector<Prediction> run_llm_predictor(LlmBackend& backend, const PromptBundle& bundle,
                                          std::uint64_t request_base = 0);

/// Runs many bundles with at most max_in_flight concurrent requests. Output
/// order follows bundle order.
std::vector<Prediction> run_llm_batches(LlmBackend& backend, const std::vector<PromptBundle>& bundles);

/// Mock responder for choice prompts: ABANDON iff not started, morning peak
/// and urgency below the threshold.
std::string mock_choice_reply(std::string_view prompt_text, const MockRuleParams& params);

}  // namespace delayptc
