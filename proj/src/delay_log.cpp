#include "delayptc/delay_log.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <regex>
#include <set>

namespace delayptc {

std::string_view to_string(DelayType t) {
    switch (t) {
    case DelayType::VehicleFault: return "VehicleFault";
    case DelayType::SignalingFault: return "SignalingFault";
    case DelayType::PowerFault: return "PowerFault";
    case DelayType::ImproperOperation: return "ImproperOperation";
    case DelayType::Others: return "Others";
    }
    return "";
}

std::string_view to_table_string(DelayType t) {
    switch (t) {
    case DelayType::VehicleFault: return "Vehicle Fault";
    case DelayType::SignalingFault: return "Signaling Fault";
    case DelayType::PowerFault: return "Power Fault";
    case DelayType::ImproperOperation: return "Improper Operation";
    case DelayType::Others: return "Others";
    }
    return "";
}

std::optional<DelayType> parse_delay_type(std::string_view text) {
    auto lower = to_lower(trim(text));
    for (auto t : kAllDelayTypes)
        if (lower == to_lower(to_string(t)) || lower == to_lower(to_table_string(t))) return t;
    return std::nullopt;
}

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Rule: return "rule";
    case Provenance::Llm: return "llm";
    case Provenance::Table: return "table";
    }
    return "";
}

std::optional<std::string> validate_event(const DelayEvent& e, const Network* network) {
    if (!e.date.ok()) return "bad-date";
    if (e.start < 0 || e.end >= 24 * 60 || e.start >= e.end) return "inverted-window";
    if (e.from_station.empty() || e.to_station.empty() || e.from_station == e.to_station) return "bad-interval";
    if (network) {
        const auto* line = network->line(e.line);
        if (!line) return "unknown-line";
        for (const auto& name : {e.from_station, e.to_station}) {
            auto id = network->find(name);
            if (!id || !line->index_of(*id)) return "unknown-station";
        }
    }
    return std::nullopt;
}

namespace {

std::optional<int> to_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// Splits "A-B" where either side may carry stray spaces. With a line, the
// split position is chosen so both halves are stations of that line.
std::optional<std::pair<std::string, std::string>> split_interval(const std::string& text, const Network* network,
                                                                  const Line* line) {
    std::vector<std::pair<std::string, std::string>> candidates;
    for (std::size_t pos = text.find('-'); pos != std::string::npos; pos = text.find('-', pos + 1))
        candidates.emplace_back(trim(text.substr(0, pos)), trim(text.substr(pos + 1)));
    if (candidates.empty()) return std::nullopt;
    if (network && line) {
        for (const auto& c : candidates) {
            auto a = network->find(c.first);
            auto b = network->find(c.second);
            if (a && b && line->index_of(*a) && line->index_of(*b)) return c;
        }
    }
    return candidates.front();
}

}  // namespace

DelayTableResult parse_structured_delays(std::string_view text, const Network* network) {
    DelayTableResult result;
    std::string current_line, current_type;
    std::set<int> ids;
    std::size_t line_no = 0;
    bool first_content = true;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        if (trim(raw).empty()) continue;
        auto f = split_row(raw);
        if (first_content) {
            first_content = false;
            if (!f.empty() && f[0] == "Line") continue;
        }
        auto reject = [&](std::string reason) { result.rejected.push_back({line_no, std::move(reason), raw}); };
        if (f.size() != 7) {
            reject("malformed-row");
            continue;
        }
        if (!f[0].empty()) current_line = f[0];
        if (!f[1].empty()) current_type = f[1];
        DelayEvent e;
        e.line = current_line;
        auto type = parse_delay_type(current_type);
        if (!type) {
            reject("unknown-delay-type");
            continue;
        }
        e.delay_type = *type;
        auto id = to_int(f[2]);
        if (!id) {
            reject("bad-event-id");
            continue;
        }
        e.event_id = *id;
        auto date = parse_date(f[3]);
        if (!date) {
            reject("bad-date");
            continue;
        }
        e.date = *date;
        auto dash = f[4].find('-');
        auto start = dash == std::string::npos ? std::nullopt : parse_hhmm(trim(f[4].substr(0, dash)));
        auto end = dash == std::string::npos ? std::nullopt : parse_hhmm(trim(f[4].substr(dash + 1)));
        if (!start || !end) {
            reject("bad-time");
            continue;
        }
        e.start = *start;
        e.end = *end;
        const Line* line = network ? network->line(e.line) : nullptr;
        auto interval = split_interval(f[5], network, line);
        if (!interval) {
            reject("bad-interval");
            continue;
        }
        e.from_station = interval->first;
        e.to_station = interval->second;
        auto dir = parse_direction(f[6]);
        if (!dir) {
            reject("bad-direction");
            continue;
        }
        e.direction = *dir;
        if (auto why = validate_event(e, network)) {
            reject(*why);
            continue;
        }
        if (!ids.insert(e.event_id).second) {
            reject("duplicate-event-id");
            continue;
        }
        result.events.push_back(std::move(e));
    }
    return result;
}

std::string format_delay_table(const std::vector<DelayEvent>& events) {
    std::string out = "Line\tDelay type\tNo.\tDate\tTime\tDelay interval\tDirection\n";
    for (const auto& e : events)
        out += fmt::format("{}\t{}\t{}\t{}\t{}-{}\t{}-{}\t{}\n", e.line, to_table_string(e.delay_type), e.event_id,
                           format_date(e.date), format_hhmm(e.start), format_hhmm(e.end), e.from_station,
                           e.to_station, to_string(e.direction));
    return out;
}

std::vector<std::string> split_narratives(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) {
            if (!trim(current).empty()) out.push_back(trim(current));
            current.clear();
        } else {
            if (!current.empty()) current += ' ';
            current += trim(line);
        }
    }
    if (!trim(current).empty()) out.push_back(trim(current));
    return out;
}

namespace {

const std::regex kTimeRe(R"((\d{1,2}):(\d{2})(?::\d{2})?(\s*([AaPp])[Mm]\b)?)");
const std::regex kMonthDateRe(
    R"(\b(January|February|March|April|May|June|July|August|September|October|November|December)\s+(\d{1,2}),?\s+(\d{4}))",
    std::regex::icase);
const std::regex kDayMonthRe(
    R"(\b(\d{1,2})\s+(January|February|March|April|May|June|July|August|September|October|November|December),?\s+(\d{4}))",
    std::regex::icase);
const std::regex kIsoDateRe(R"(\b(\d{4})[-/](\d{1,2})[-/](\d{1,2})\b)");
const std::regex kLineRe(R"(\bLine\s*(\d+)\b)", std::regex::icase);
const std::regex kEventIdRe(R"(\b(?:Event|Incident)\s*(?:No\.?|#)\s*(\d+))", std::regex::icase);
const std::regex kDirectionRe(R"(\b(up|down)(?:ward)?[\s-]?(?:line|direction|track|bound|side)\b)",
                              std::regex::icase);
const std::regex kDirectionLabelRe(R"(\bdirection\s*[:=]?\s*(up|down)\b)", std::regex::icase);
const std::regex kTrainDelayRe(R"((\d+)\s+minutes?(?:\s+(?:and\s+)?(\d+)\s+seconds?)?)", std::regex::icase);

int month_number(std::string name) {
    static const char* months[] = {"january", "february", "march",     "april",   "may",      "june",
                                   "july",    "august",   "september", "october", "november", "december"};
    name = to_lower(name);
    for (int i = 0; i < 12; ++i)
        if (name == months[i]) return i + 1;
    return 0;
}

std::optional<Date> make_date(int y, int m, int d) {
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::optional<Date> find_date(const std::string& text) {
    std::optional<std::pair<std::ptrdiff_t, Date>> best;
    auto consider = [&](std::ptrdiff_t pos, std::optional<Date> d) {
        if (d && (!best || pos < best->first)) best = {pos, *d};
    };
    std::smatch m;
    if (std::regex_search(text, m, kMonthDateRe))
        consider(m.position(0), make_date(std::stoi(m[3]), month_number(m[1]), std::stoi(m[2])));
    if (std::regex_search(text, m, kDayMonthRe))
        consider(m.position(0), make_date(std::stoi(m[3]), month_number(m[2]), std::stoi(m[1])));
    if (std::regex_search(text, m, kIsoDateRe))
        consider(m.position(0), make_date(std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])));
    if (!best) return std::nullopt;
    return best->second;
}

std::string normalize(std::string_view raw) {
    std::string text(raw);
    // Curly apostrophes and dotted meridiem markers.
    for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
             {"\xE2\x80\x99", "'"}, {"a.m.", "AM"}, {"A.M.", "AM"}, {"p.m.", "PM"}, {"P.M.", "PM"}}) {
        for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
            text.replace(pos, from.size(), to);
    }
    std::string out;
    bool space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

struct Sentence {
    std::size_t begin = 0;
    std::string text;
};

std::vector<Sentence> split_sentences(const std::string& text) {
    std::vector<Sentence> out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?' && c != ';') continue;
        if (i + 1 < text.size() && text[i + 1] != ' ') continue;
        if (c == '.' && i >= 2 && to_lower(text.substr(i - 2, 2)) == "no") continue;
        out.push_back({begin, text.substr(begin, i + 1 - begin)});
        begin = i + 2;
    }
    if (begin < text.size()) out.push_back({begin, text.substr(begin)});
    return out;
}

bool contains_any(const std::string& lower, std::initializer_list<const char*> words) {
    return std::any_of(words.begin(), words.end(), [&](const char* w) { return lower.find(w) != std::string::npos; });
}

struct Mention {
    std::size_t pos = 0;
    std::size_t len = 0;
    StationId station;
    bool destination = false;  // "destined for X", "towards X", ...
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '\''; }

std::vector<Mention> find_mentions(const std::string& text, const Network& network) {
    auto lower = to_lower(text);
    std::vector<Mention> all;
    for (const auto& st : network.stations()) {
        auto name = to_lower(st.name);
        for (auto pos = lower.find(name); pos != std::string::npos; pos = lower.find(name, pos + 1)) {
            bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
            bool right_ok = pos + name.size() >= lower.size() || !is_word_char(lower[pos + name.size()]);
            if (left_ok && right_ok) all.push_back({pos, name.size(), st.id, false});
        }
    }
    std::sort(all.begin(), all.end(), [](const Mention& a, const Mention& b) {
        return a.pos != b.pos ? a.pos < b.pos : a.len > b.len;
    });
    std::vector<Mention> out;
    for (const auto& m : all) {
        if (!out.empty() && m.pos < out.back().pos + out.back().len) continue;
        auto ctx = lower.substr(m.pos >= 24 ? m.pos - 24 : 0, m.pos >= 24 ? 24 : m.pos);
        Mention kept = m;
        kept.destination = contains_any(ctx, {"destined for", "bound for", "toward", "heading to", "terminating at"});
        out.push_back(kept);
    }
    return out;
}

std::optional<DelayType> classify_cause(const std::string& lower) {
    // Explicit category names win over cause keywords.
    for (auto t : kAllDelayTypes)
        if (t != DelayType::Others && lower.find(to_lower(to_table_string(t))) != std::string::npos) return t;
    if (lower.find("signalling fault") != std::string::npos) return DelayType::SignalingFault;
    if (contains_any(lower, {"signal", "interlocking", "track circuit", "cbtc", "axle counter"}))
        return DelayType::SignalingFault;
    if (contains_any(lower, {"power supply", "traction power", "catenary", "power outage", "power failure",
                             "blackout", "substation"}))
        return DelayType::PowerFault;
    if (contains_any(lower, {"improper", "mis-operation", "misoperation", "operator error", "human error",
                             "operating error"}))
        return DelayType::ImproperOperation;
    if (contains_any(lower, {"vehicle", "brake", "bogie", "traction motor", "pantograph", "train fault",
                             "rolling stock"}))
        return DelayType::VehicleFault;
    if (contains_any(lower, {"door", "object", "foreign", "jamming", "intrusion", "passenger", "weather", "flood"}))
        return DelayType::Others;
    return std::nullopt;
}

struct TimeHit {
    int minutes = 0;
    std::size_t sentence = 0;
};

ExtractionResult extract_rule(std::string_view raw, const Network& network, const ExtractionOptions& options) {
    auto text = normalize(raw);
    auto lower = to_lower(text);
    auto sentences = split_sentences(text);

    ExtractionResult result;
    auto& e = result.event;
    auto mark = [&](const char* field) { result.provenance[field] = Provenance::Rule; };

    // Clock times, classified by the sentence they occur in.
    std::optional<int> start;
    std::vector<int> recovery, resolution;
    bool any_time = false;
    for (const auto& s : sentences) {
        auto sl = to_lower(s.text);
        bool ignore = contains_any(sl, {"following day", "next day", "the day after"});
        bool is_recovery = contains_any(sl, {"recover", "resum", "restored", "returned to normal", "back to normal",
                                             "normal service", "normal operation", "last delayed train",
                                             "cleared the section"});
        bool is_resolution = contains_any(sl, {"resolved", "fixed", "rectified", "repaired", "eliminated", "cleared"});
        for (auto it = std::sregex_iterator(s.text.begin(), s.text.end(), kTimeRe); it != std::sregex_iterator();
             ++it) {
            const auto& m = *it;
            int h = std::stoi(m[1]);
            int mi = std::stoi(m[2]);
            if (m[4].matched) {
                bool pm = std::toupper(static_cast<unsigned char>(m[4].str()[0])) == 'P';
                if (h < 1 || h > 12) continue;
                h = h % 12 + (pm ? 12 : 0);
            }
            if (h > 23 || mi > 59) continue;
            any_time = true;
            int minutes = h * 60 + mi;
            if (ignore) continue;
            if (is_recovery)
                recovery.push_back(minutes);
            else if (is_resolution)
                resolution.push_back(minutes);
            else if (!start)
                start = minutes;
        }
    }
    if (!any_time || !start) throw Error("no-event-found", "no clock times describing an event");
    e.start = *start;
    mark("start");
    if (!recovery.empty()) {
        e.end = *std::max_element(recovery.begin(), recovery.end());
    } else if (!resolution.empty()) {
        e.end = *std::max_element(resolution.begin(), resolution.end());
        result.flags.push_back("end-from-resolution");
    } else {
        throw Error("no-end-time", "neither recovery nor resolution time found");
    }
    mark("end");

    auto date = find_date(text);
    if (!date) throw Error("no-event-found", "no date found");
    e.date = *date;
    mark("date");

    std::smatch m;
    if (std::regex_search(text, m, kEventIdRe))
        e.event_id = std::stoi(m[1]);
    else
        e.event_id = options.event_id_hint.value_or(0);

    // Line: explicit "Line N", else the unique line shared by all mentioned stations.
    auto mentions = find_mentions(text, network);
    std::string line_id;
    if (std::regex_search(text, m, kLineRe)) {
        line_id = "Line " + m[1].str();
        if (!network.line(line_id)) throw Error("ambiguous-line", line_id + " is not in the network");
    } else {
        std::optional<std::set<std::string>> common;
        for (const auto& mt : mentions) {
            auto lines = network.lines_at(mt.station);
            std::set<std::string> here(lines.begin(), lines.end());
            if (!common) {
                common = here;
            } else {
                std::set<std::string> both;
                std::set_intersection(common->begin(), common->end(), here.begin(), here.end(),
                                      std::inserter(both, both.begin()));
                common = both;
            }
        }
        if (!common || common->size() != 1)
            throw Error("ambiguous-line", "station mentions do not identify a unique line");
        line_id = *common->begin();
        result.flags.push_back("line-inferred");
    }
    e.line = line_id;
    mark("line");
    const Line& line = *network.line(line_id);

    std::vector<Mention> on_line;
    for (const auto& mt : mentions)
        if (line.index_of(mt.station)) on_line.push_back(mt);

    std::optional<StationId> incident;
    for (const auto& mt : on_line)
        if (!mt.destination) {
            incident = mt.station;
            break;
        }
    if (!incident) throw Error("invalid-event", "no incident station on " + line_id);

    // Direction: keyword first, then a "towards X" destination on the same line.
    if (std::regex_search(text, m, kDirectionRe) || std::regex_search(text, m, kDirectionLabelRe)) {
        e.direction = to_lower(m[1].str()) == "up" ? Direction::Up : Direction::Down;
    } else {
        std::optional<Direction> inferred;
        for (const auto& mt : on_line) {
            if (!mt.destination || mt.station == *incident) continue;
            inferred = *line.index_of(mt.station) > *line.index_of(*incident) ? Direction::Up : Direction::Down;
            break;
        }
        if (!inferred) throw Error("no-direction", "direction not stated or inferable");
        e.direction = *inferred;
        result.flags.push_back("direction-inferred");
    }
    mark("direction");

    // Interval: first sentence naming two distinct line stations; otherwise
    // from the incident station to the terminus in the travel direction.
    std::optional<std::pair<StationId, StationId>> interval;
    for (const auto& s : sentences) {
        std::vector<StationId> seen;
        for (const auto& mt : on_line) {
            if (mt.destination || mt.pos < s.begin || mt.pos >= s.begin + s.text.size()) continue;
            if (std::find(seen.begin(), seen.end(), mt.station) == seen.end()) seen.push_back(mt.station);
        }
        if (seen.size() >= 2) {
            interval = {seen[0], seen[1]};
            break;
        }
    }
    if (!interval) {
        auto terminus = e.direction == Direction::Up ? line.stations.back() : line.stations.front();
        if (terminus == *incident) throw Error("invalid-event", "incident station is the terminus");
        interval = {*incident, terminus};
        result.flags.push_back("interval-inferred");
    }
    e.from_station = network.name(interval->first);
    e.to_station = network.name(interval->second);
    mark("from_station");
    mark("to_station");

    if (auto t = classify_cause(lower)) {
        e.delay_type = *t;
    } else {
        e.delay_type = DelayType::Others;
        result.flags.push_back("type-defaulted");
    }
    mark("delay_type");

    for (auto it = std::sregex_iterator(text.begin(), text.end(), kTrainDelayRe); it != std::sregex_iterator();
         ++it) {
        double minutes = std::stod((*it)[1]) + ((*it)[2].matched ? std::stod((*it)[2]) / 60.0 : 0.0);
        result.max_train_delay_minutes = std::max(result.max_train_delay_minutes.value_or(0.0), minutes);
    }

    if (auto why = validate_event(e, &network)) throw Error("invalid-event", *why);
    result.confidence = std::max(0.0, 5.0 - static_cast<double>(result.flags.size())) / 5.0;
    return result;
}

std::optional<DelayEvent> parse_extraction_reply(const std::string& reply, const Network& network) {
    std::map<std::string, std::string> kv;
    for (const auto& raw : split(reply, '\n')) {
        auto line = trim(raw);
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        auto key = to_lower(trim(line.substr(0, colon)));
        std::erase_if(key, [](char c) { return c == '*' || c == '-' || c == ' '; });
        kv.emplace(key, trim(line.substr(colon + 1)));
    }
    auto get = [&](const char* k) -> std::optional<std::string> {
        auto it = kv.find(k);
        if (it == kv.end() || it->second.empty()) return std::nullopt;
        return it->second;
    };
    auto line = get("line"), date = get("date"), start = get("start"), end = get("end"), from = get("from"),
         to = get("to"), dir = get("direction"), type = get("type");
    if (!line || !date || !start || !end || !from || !to || !dir || !type) return std::nullopt;
    DelayEvent e;
    e.line = *line;
    auto d = parse_date(*date);
    auto s = parse_hhmm(*start);
    auto en = parse_hhmm(*end);
    auto di = parse_direction(*dir);
    auto ty = parse_delay_type(*type);
    if (!d || !s || !en || !di || !ty) return std::nullopt;
    e.date = *d;
    e.start = *s;
    e.end = *en;
    e.from_station = *from;
    e.to_station = *to;
    e.direction = *di;
    e.delay_type = *ty;
    if (auto id = get("event_id")) {
        auto v = to_int(*id);
        if (v) e.event_id = *v;
    }
    if (validate_event(e, &network)) return std::nullopt;
    return e;
}

ExtractionResult extract_llm(std::string_view text, const Network& network, const ExtractionOptions& options) {
    if (!options.llm) throw Error("missing-backend", "llm extraction needs a backend");
    auto& backend = *options.llm;
    LlmRequest request;
    request.system = "You are an analyst in the operations department of an urban rail transit system.";
    request.user = render_extraction_prompt(text, network);
    int budget = backend.limits().retry_budget;
    for (int attempt = 0; attempt <= budget; ++attempt) {
        request.id = static_cast<std::uint64_t>(attempt);
        std::string reply;
        try {
            reply = backend.complete(request);
        } catch (const TransportError& err) {
            spdlog::warn("extraction attempt {} failed: {}", attempt, err.what());
            continue;
        }
        if (auto event = parse_extraction_reply(reply, network)) {
            ExtractionResult result;
            result.event = *event;
            if (result.event.event_id == 0) result.event.event_id = options.event_id_hint.value_or(0);
            for (const char* f : {"line", "date", "start", "end", "from_station", "to_station", "direction",
                                  "delay_type"})
                result.provenance[f] = Provenance::Llm;
            result.confidence = 0.8;
            return result;
        }
        request.user = render_extraction_prompt(text, network) +
                       "\nYour previous reply could not be parsed. Reply with ONLY the nine KEY: value lines, "
                       "using station names exactly as listed.\n";
    }
    throw Error("unparseable-llm-reply", "no valid extraction after retries");
}

}  // namespace

ExtractionResult extract_from_log(std::string_view text, const Network& network, const ExtractionOptions& options) {
    if (options.backend == ExtractionBackend::Llm) return extract_llm(text, network, options);
    return extract_rule(text, network, options);
}

std::string render_extraction_prompt(std::string_view narrative, const Network& network) {
    std::string out = "### Task: delay-extraction\n";
    out += "Read the delay log below and extract the structured delay event.\n";
    out += "Reply with exactly these lines and nothing else:\n";
    out += "EVENT_ID: <integer, blank if not stated>\nLINE: <line id>\nDATE: <YYYY-MM-DD>\nSTART: <HH:MM>\n";
    out += "END: <HH:MM, time service recovered>\nFROM: <station>\nTO: <station>\nDIRECTION: <Up|Down>\n";
    out += "TYPE: <VehicleFault|SignalingFault|PowerFault|ImproperOperation|Others>\n\n";
    out += "Lines and stations (Up = listed order):\n";
    for (const auto& line : network.lines()) {
        out += line.id + ": ";
        for (std::size_t i = 0; i < line.stations.size(); ++i)
            out += (i ? ", " : "") + network.name(line.stations[i]);
        out += "\n";
    }
    out += "\nDelay log:\n<<<\n" + std::string(narrative) + "\n>>>\n";
    return out;
}

std::string format_extraction_reply(const DelayEvent& e) {
    return fmt::format("EVENT_ID: {}\nLINE: {}\nDATE: {}\nSTART: {}\nEND: {}\nFROM: {}\nTO: {}\nDIRECTION: {}\nTYPE: {}\n",
                       e.event_id == 0 ? std::string() : std::to_string(e.event_id), e.line, format_date(e.date),
                       format_hhmm(e.start), format_hhmm(e.end), e.from_station, e.to_station,
                       to_string(e.direction), to_string(e.delay_type));
}

std::string event_to_json(const DelayEvent& e, const ExtractionResult* extraction) {
    nlohmann::ordered_json j;
    j["event_id"] = e.event_id;
    j["line"] = e.line;
    j["delay_type"] = to_string(e.delay_type);
    j["date"] = format_date(e.date);
    j["start"] = format_hhmm(e.start);
    j["end"] = format_hhmm(e.end);
    j["from_station"] = e.from_station;
    j["to_station"] = e.to_station;
    j["direction"] = to_string(e.direction);
    if (extraction) {
        j["confidence"] = extraction->confidence;
        nlohmann::ordered_json prov = nlohmann::ordered_json::object();
        for (const auto& [field, p] : extraction->provenance) prov[field] = to_string(p);
        j["provenance"] = prov;
        j["flags"] = extraction->flags;
    }
    return j.dump();
}

DelayEvent event_from_json(std::string_view line) {
    try {
        auto j = nlohmann::json::parse(line);
        DelayEvent e;
        e.event_id = j.at("event_id").get<int>();
        e.line = j.at("line").get<std::string>();
        auto type = parse_delay_type(j.at("delay_type").get<std::string>());
        auto date = parse_date(j.at("date").get<std::string>());
        auto start = parse_hhmm(j.at("start").get<std::string>());
        auto end = parse_hhmm(j.at("end").get<std::string>());
        auto dir = parse_direction(j.at("direction").get<std::string>());
        if (!type || !date || !start || !end || !dir) throw Error("malformed-event-file", std::string(line));
        e.delay_type = *type;
        e.date = *date;
        e.start = *start;
        e.end = *end;
        e.from_station = j.at("from_station").get<std::string>();
        e.to_station = j.at("to_station").get<std::string>();
        e.direction = *dir;
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error("malformed-event-file", ex.what());
    }
}

std::string format_events_jsonl(const std::vector<DelayEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        ExtractionResult table;
        table.event = e;
        for (const char* f : {"line", "date", "start", "end", "from_station", "to_station", "direction", "delay_type"})
            table.provenance[f] = Provenance::Table;
        out += event_to_json(e, &table) + "\n";
    }
    return out;
}

std::vector<DelayEvent> parse_events_jsonl(std::string_view text) {
    std::vector<DelayEvent> out;
    for (const auto& line : split(text, '\n'))
        if (!trim(line).empty()) out.push_back(event_from_json(line));
    return out;
}

}  // namespace delayptc
