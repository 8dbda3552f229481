#pragma once

#include "delayptc/common.hpp"
#include "delayptc/llm.hpp"
#include "delayptc/transit.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

enum class DelayType { VehicleFault, SignalingFault, PowerFault, ImproperOperation, Others };

inline constexpr DelayType kAllDelayTypes[] = {DelayType::VehicleFault, DelayType::SignalingFault,
                                               DelayType::PowerFault, DelayType::ImproperOperation,
                                               DelayType::Others};

std::string_view to_string(DelayType t);       // canonical: "VehicleFault"
std::string_view to_table_string(DelayType t);  // delay table: "Vehicle Fault"
/// Accepts canonical or table spellings, case-insensitive.
std::optional<DelayType> parse_delay_type(std::string_view text);

struct DelayEvent {
    int event_id = 0;
    std::string line;
    DelayType delay_type = DelayType::Others;
    Date date;
    int start = 0;  // minutes of day
    int end = 0;
    std::string from_station;
    std::string to_station;
    Direction direction = Direction::Up;

    auto operator<=>(const DelayEvent&) const = default;
};

/// Reason the event breaks an invariant, or nullopt when valid.
std::optional<std::string> validate_event(const DelayEvent& event, const Network* network);

enum class Provenance { Rule, Llm, Table };
std::string_view to_string(Provenance p);

struct ExtractionResult {
    DelayEvent event;
    double confidence = 1.0;
    std::map<std::string, Provenance> provenance;  // per field name
    std::vector<std::string> flags;                // e.g. end-from-resolution, interval-inferred
    std::optional<double> max_train_delay_minutes;  // largest per-train delay quoted, informational
};

struct DelayRejection {
    std::size_t line_number = 0;
    std::string reason;
    std::string raw;
};

struct DelayTableResult {
    std::vector<DelayEvent> events;
    std::vector<DelayRejection> rejected;
};

/// Parses the 7-column delay table (Line, Delay type, No., Date, Time, Delay
/// interval, Direction). Empty Line / Delay type cells inherit the previous
/// row's value. With a network, interval stations are checked against the line.
DelayTableResult parse_structured_delays(std::string_view text, const Network* network = nullptr);
std::string format_delay_table(const std::vector<DelayEvent>& events);

enum class ExtractionBackend { Rule, Llm };

struct ExtractionOptions {
    ExtractionBackend backend = ExtractionBackend::Rule;
    LlmBackend* llm = nullptr;            // required for the llm backend
    std::optional<int> event_id_hint;     // used when the text names no event number
};

/// Structured event from one narrative. Throws Error with code no-event-found,
/// ambiguous-line, no-direction, no-end-time, invalid-event or
/// unparseable-llm-reply.
ExtractionResult extract_from_log(std::string_view text, const Network& network,
                                  const ExtractionOptions& options = {});

/// Narratives separated by blank lines.
std::vector<std::string> split_narratives(std::string_view text);

/// Prompt used by the llm backend; the narrative is fenced by <<< and >>>.
std::string render_extraction_prompt(std::string_view narrative, const Network& network);
/// Reply in the constrained KEY: value format the extraction prompt asks for.
std::string format_extraction_reply(const DelayEvent& event);

std::string event_to_json(const DelayEvent& event, const ExtractionResult* extraction = nullptr);
DelayEvent event_from_json(std::string_view line);
std::string format_events_jsonl(const std::vector<DelayEvent>& events);
std::vector<DelayEvent> parse_events_jsonl(std::string_view text);

}  // namespace delayptc
