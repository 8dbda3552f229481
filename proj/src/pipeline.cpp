#include "delayptc/pipeline.hpp"

#include "delayptc/delay_log.hpp"
#include "delayptc/eval.hpp"
#include "delayptc/llm.hpp"
#include "delayptc/predictor.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <set>

namespace delayptc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Configuration.

namespace {

ojson peak_pair(int lo, int hi) { return ojson::array({format_hhmm(lo), format_hhmm(hi)}); }

ojson to_ojson(const PipelineConfig& c) {
    ojson j;
    j["paths"] = {{"network", c.paths.network},         {"calendar", c.paths.calendar},
                  {"afc", c.paths.afc},                 {"delay_table", c.paths.delay_table},
                  {"delay_logs", c.paths.delay_logs},   {"output_dir", c.paths.output_dir},
                  {"printed_table", c.paths.printed_table}};
    j["seed"] = c.seed;
    j["strict"] = c.strict;
    j["afc"] = {{"max_trip_duration", c.reconstruct.max_trip_duration}};
    j["screening"] = {{"day_threshold", c.screen.day_threshold}, {"od_day_threshold", c.screen.od_day_threshold}};
    j["clustering"] = {{"eps_minutes", c.cluster.eps_minutes}, {"min_pts", c.cluster.min_pts}};
    j["impact"] = {{"window_pad_minutes", c.impact.window_pad_minutes}};
    j["labeling"] = {{"slack_minutes", c.label.slack_minutes}};
    j["peaks"] = {{"morning", peak_pair(c.peaks.morning_start, c.peaks.morning_end)},
                  {"evening", peak_pair(c.peaks.evening_start, c.peaks.evening_end)}};
    j["extraction_backend"] = c.extraction_backend;
    const auto& p = c.predictor;
    j["predictor"] = {{"backend", p.backend},
                      {"endpoint", p.endpoint},
                      {"model", p.model},
                      {"api_key_env", p.api_key_env},
                      {"max_in_flight", p.max_in_flight},
                      {"timeout_ms", p.timeout_ms},
                      {"retry_budget", p.retry_budget},
                      {"batch_size", p.batch_size},
                      {"temperature", p.temperature},
                      {"mock_urgency_threshold", p.mock_urgency_threshold},
                      {"models", p.models}};
    j["predictor"]["forest"] = {{"n_trees", p.forest.n_trees},
                                {"max_depth", p.forest.tree.max_depth},
                                {"min_samples_leaf", p.forest.tree.min_samples_leaf},
                                {"bootstrap", p.forest.bootstrap},
                                {"sqrt_features", p.forest.sqrt_features}};
    j["predictor"]["boosting"] = {{"n_rounds", p.boosting.n_rounds},
                                  {"learning_rate", p.boosting.learning_rate},
                                  {"max_depth", p.boosting.max_depth},
                                  {"l2", p.boosting.l2},
                                  {"min_child_hessian", p.boosting.min_child_hessian}};
    j["split"] = {{"mode", c.split.mode}, {"test_share", c.split.test_share}, {"holdout_event", c.split.holdout_event}};
    const auto& s = c.synth;
    j["synth"] = {{"regular_count", s.regular_count}, {"casual_count", s.casual_count},
                  {"first_day", s.first_day},         {"weekday_count", s.weekday_count},
                  {"event_ids", s.event_ids},         {"targeted_share", s.targeted_share},
                  {"abandon_rate", s.abandon_rate},   {"noise_rate", s.noise_rate},
                  {"min_jitter", s.min_jitter},       {"max_jitter", s.max_jitter},
                  {"high_propensity_weight", s.high_propensity_weight}};
    return j;
}

void collect_unknown(const nlohmann::json& given, const ojson& known, const std::string& prefix,
                     std::vector<std::string>& out) {
    for (auto it = given.begin(); it != given.end(); ++it) {
        auto path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!known.contains(it.key())) {
            out.push_back(path);
            continue;
        }
        if (it->is_object() && known.at(it.key()).is_object()) collect_unknown(*it, known.at(it.key()), path, out);
    }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.is_object() && obj.contains(key)) out = obj.at(key).get<T>();
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    return j.contains(key) ? j.at(key) : empty;
}

void read_peak(const nlohmann::json& obj, const char* key, int& lo, int& hi) {
    if (!obj.contains(key)) return;
    auto pair = obj.at(key).get<std::vector<std::string>>();
    auto a = pair.size() == 2 ? parse_hhmm(pair[0]) : std::nullopt;
    auto b = pair.size() == 2 ? parse_hhmm(pair[1]) : std::nullopt;
    if (!a || !b || *a >= *b) throw Error("malformed-config", fmt::format("peaks.{} must be [\"HH:MM\", \"HH:MM\"]", key));
    lo = *a;
    hi = *b;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) { return to_ojson(config).dump(2) + "\n"; }

PipelineConfig config_from_json(std::string_view text, std::vector<std::string>* unknown_keys) {
    PipelineConfig c;
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw Error("malformed-config", "configuration must be a JSON object");
        if (unknown_keys) collect_unknown(j, to_ojson(c), "", *unknown_keys);

        const auto& paths = section(j, "paths");
        read(paths, "network", c.paths.network);
        read(paths, "calendar", c.paths.calendar);
        read(paths, "afc", c.paths.afc);
        read(paths, "delay_table", c.paths.delay_table);
        read(paths, "delay_logs", c.paths.delay_logs);
        read(paths, "output_dir", c.paths.output_dir);
        read(paths, "printed_table", c.paths.printed_table);
        read(j, "seed", c.seed);
        read(j, "strict", c.strict);
        read(section(j, "afc"), "max_trip_duration", c.reconstruct.max_trip_duration);
        read(section(j, "screening"), "day_threshold", c.screen.day_threshold);
        read(section(j, "screening"), "od_day_threshold", c.screen.od_day_threshold);
        read(section(j, "clustering"), "eps_minutes", c.cluster.eps_minutes);
        read(section(j, "clustering"), "min_pts", c.cluster.min_pts);
        read(section(j, "impact"), "window_pad_minutes", c.impact.window_pad_minutes);
        read(section(j, "labeling"), "slack_minutes", c.label.slack_minutes);
        read_peak(section(j, "peaks"), "morning", c.peaks.morning_start, c.peaks.morning_end);
        read_peak(section(j, "peaks"), "evening", c.peaks.evening_start, c.peaks.evening_end);
        read(j, "extraction_backend", c.extraction_backend);

        const auto& pj = section(j, "predictor");
        auto& p = c.predictor;
        read(pj, "backend", p.backend);
        read(pj, "endpoint", p.endpoint);
        read(pj, "model", p.model);
        read(pj, "api_key_env", p.api_key_env);
        read(pj, "max_in_flight", p.max_in_flight);
        read(pj, "timeout_ms", p.timeout_ms);
        read(pj, "retry_budget", p.retry_budget);
        read(pj, "batch_size", p.batch_size);
        read(pj, "temperature", p.temperature);
        read(pj, "mock_urgency_threshold", p.mock_urgency_threshold);
        read(pj, "models", p.models);
        const auto& fj = section(pj, "forest");
        read(fj, "n_trees", p.forest.n_trees);
        read(fj, "max_depth", p.forest.tree.max_depth);
        read(fj, "min_samples_leaf", p.forest.tree.min_samples_leaf);
        read(fj, "bootstrap", p.forest.bootstrap);
        read(fj, "sqrt_features", p.forest.sqrt_features);
        const auto& bj = section(pj, "boosting");
        read(bj, "n_rounds", p.boosting.n_rounds);
        read(bj, "learning_rate", p.boosting.learning_rate);
        read(bj, "max_depth", p.boosting.max_depth);
        read(bj, "l2", p.boosting.l2);
        read(bj, "min_child_hessian", p.boosting.min_child_hessian);

        const auto& sj = section(j, "split");
        read(sj, "mode", c.split.mode);
        read(sj, "test_share", c.split.test_share);
        read(sj, "holdout_event", c.split.holdout_event);

        const auto& yj = section(j, "synth");
        auto& s = c.synth;
        read(yj, "regular_count", s.regular_count);
        read(yj, "casual_count", s.casual_count);
        read(yj, "first_day", s.first_day);
        read(yj, "weekday_count", s.weekday_count);
        read(yj, "event_ids", s.event_ids);
        read(yj, "targeted_share", s.targeted_share);
        read(yj, "abandon_rate", s.abandon_rate);
        read(yj, "noise_rate", s.noise_rate);
        read(yj, "min_jitter", s.min_jitter);
        read(yj, "max_jitter", s.max_jitter);
        read(yj, "high_propensity_weight", s.high_propensity_weight);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-config", e.what());
    }
    return c;
}

PipelineConfig load_config(const fs::path& path, bool strict) {
    std::vector<std::string> unknown;
    auto config = config_from_json(read_file(path), &unknown);
    for (const auto& key : unknown) spdlog::warn("unknown configuration key '{}'", key);
    if (strict && !unknown.empty()) throw Error("unknown-config-key", unknown.front());
    return config;
}

WorldConfig world_config(const PipelineConfig& c) {
    WorldConfig w;
    w.seed = c.seed;
    w.regular_count = c.synth.regular_count;
    w.casual_count = c.synth.casual_count;
    auto first = parse_date(c.synth.first_day);
    if (!first) throw Error("malformed-config", "synth.first_day must be YYYY-MM-DD");
    w.first_day = *first;
    w.weekday_count = c.synth.weekday_count;
    auto recorded = recorded_delays();
    w.events.clear();
    for (int id : c.synth.event_ids) {
        auto it = std::find_if(recorded.begin(), recorded.end(), [&](const DelayEvent& e) { return e.event_id == id; });
        if (it == recorded.end()) throw Error("malformed-config", fmt::format("synth.event_ids: no event {}", id));
        w.events.push_back(*it);
    }
    w.targeted_share = c.synth.targeted_share;
    w.abandon_rate = c.synth.abandon_rate;
    w.noise_rate = c.synth.noise_rate;
    w.min_jitter = c.synth.min_jitter;
    w.max_jitter = c.synth.max_jitter;
    w.high_propensity_weight = c.synth.high_propensity_weight;
    w.urgency_threshold = c.predictor.mock_urgency_threshold;
    w.screen = c.screen;
    w.cluster = c.cluster;
    w.impact = c.impact;
    w.label = c.label;
    w.peaks = c.peaks;
    return w;
}

// Labels and splits.

std::string format_labels(const std::vector<LabelRow>& rows) {
    std::string out = "card_id\tevent_id\tlabel\tstarted\tcorroborated\tconflict\n";
    auto b = [](bool v) { return v ? "true" : "false"; };
    for (const auto& r : rows)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", r.key.card_id, r.key.event_id, to_string(r.label), b(r.started),
                           b(r.corroborated), b(r.conflict));
    return out;
}

std::vector<LabelRow> parse_labels(std::string_view text) {
    std::vector<LabelRow> out;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split(line, '\t');
        auto label = f.size() == 6 ? parse_choice_label(f[2]) : std::nullopt;
        if (!label) throw Error("malformed-labels", fmt::format("line {}", line_no));
        LabelRow r;
        r.key = {f[0], std::stoi(f[1])};
        r.label = *label;
        r.started = f[3] == "true";
        r.corroborated = f[4] == "true";
        r.conflict = f[5] == "true";
        out.push_back(std::move(r));
    }
    return out;
}

SplitAssignment split_dataset(const std::vector<ChoiceRecord>& records, const SplitConfig& config, std::uint64_t seed) {
    SplitAssignment out;
    if (config.mode == "leave-one-event-out") {
        for (const auto& r : records) (r.event_id == config.holdout_event ? out.test : out.train).push_back(r.key());
        if (out.test.empty())
            throw Error("empty-split", fmt::format("no records for held-out event {}", config.holdout_event));
    } else if (config.mode == "stratified") {
        if (config.test_share <= 0.0 || config.test_share >= 1.0)
            throw Error("malformed-config", "split.test_share must lie in (0, 1)");
        Rng rng(seed);
        for (auto cls : {ChoiceLabel::Wait, ChoiceLabel::Abandon}) {
            std::vector<RecordKey> keys;
            for (const auto& r : records)
                if (r.label == cls) keys.push_back(r.key());
            std::sort(keys.begin(), keys.end());
            rng.shuffle(keys);
            auto n_test = static_cast<std::size_t>(std::llround(config.test_share * static_cast<double>(keys.size())));
            out.test.insert(out.test.end(), keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_test));
            out.train.insert(out.train.end(), keys.begin() + static_cast<std::ptrdiff_t>(n_test), keys.end());
        }
    } else {
        throw Error("malformed-config", "split.mode must be stratified or leave-one-event-out");
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// Stages.

namespace {

fs::path artifact(const PipelineConfig& c, const std::string& name) { return fs::path(c.paths.output_dir) / name; }

std::string require(const fs::path& path, const std::string& stage) {
    if (!fs::exists(path)) throw MissingArtifact(stage, path);
    return read_file(path);
}

Network load_network(const PipelineConfig& c) { return Network::from_json_text(require(c.paths.network, "synth")); }

std::vector<DelayEvent> load_events(const PipelineConfig& c) {
    return parse_events_jsonl(require(artifact(c, "events.jsonl"), "delays"));
}

std::vector<TravelPattern> load_patterns(const PipelineConfig& c) {
    return parse_patterns(require(artifact(c, "patterns.tsv"), "mine"));
}

std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& c) {
    const auto& p = c.predictor;
    BackendLimits limits{std::max<std::size_t>(1, p.max_in_flight), std::chrono::milliseconds{p.timeout_ms},
                         p.retry_budget};
    if (p.backend == "mock") {
        auto backend = make_rule_mock_backend({p.mock_urgency_threshold});
        backend->set_limits(limits);
        return backend;
    }
    if (p.backend == "http") return make_http_backend({p.endpoint, p.model, p.api_key_env}, limits);
    throw Error("malformed-config", "predictor.backend must be mock or http");
}

void stage_synth(const PipelineConfig& c) {
    auto world = generate_world(world_config(c));
    write_file_atomic(c.paths.network, world.network.to_json_text());
    write_file_atomic(c.paths.calendar, world.calendar.to_text());
    write_file_atomic(c.paths.afc, format_afc(world.records));
    write_file_atomic(c.paths.delay_table, format_delay_table(world.events));
    write_file_atomic(c.paths.delay_logs, world.narratives);

    const auto& t = world.truth;
    auto truth_dir = fs::path(c.paths.output_dir) / "truth";
    std::string regulars, casuals;
    for (const auto& id : t.regular_cards) regulars += id + "\n";
    for (const auto& id : t.casual_cards) casuals += id + "\n";
    std::string planted = "card_id\thome\twork\tmorning_center\tevening_center\tmorning_jitter\tevening_jitter\tnormal_days\n";
    for (const auto& p : t.planted)
        planted += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.card_id, p.home, p.work, p.morning_center,
                               p.evening_center, p.morning_jitter, p.evening_jitter, p.normal_days);
    write_file_atomic(truth_dir / "regular_cards.txt", regulars);
    write_file_atomic(truth_dir / "casual_cards.txt", casuals);
    write_file_atomic(truth_dir / "planted.tsv", planted);
    write_file_atomic(truth_dir / "patterns.tsv", format_patterns(t.patterns));
    write_file_atomic(truth_dir / "affected.jsonl", format_affected_jsonl(t.affected));
    write_file_atomic(truth_dir / "labels.tsv", format_dataset(t.labeled));
    std::size_t abandon = std::count_if(t.labeled.begin(), t.labeled.end(),
                                        [](const ChoiceRecord& r) { return r.label == ChoiceLabel::Abandon; });
    spdlog::info("synth: {} records, {} regulars, {} casuals, {} events, {} affected ({} abandon)",
                 world.records.size(), t.regular_cards.size(), t.casual_cards.size(), world.events.size(),
                 t.affected.size(), abandon);
}

void stage_ingest(const PipelineConfig& c) {
    auto calendar = Calendar::parse(require(c.paths.calendar, "synth"));
    auto parsed = parse_afc_text(require(c.paths.afc, "synth"), {&calendar});
    auto records_text = format_afc(parsed.records);
    auto rebuilt = reconstruct_trips(std::move(parsed.records), c.reconstruct);

    ojson report;
    report["input_rows"] = parsed.report.input_rows;
    report["accepted"] = parsed.report.accepted;
    report["rejected"] = parsed.report.rejected.size();
    std::map<std::string, std::size_t> by_reason;
    for (const auto& r : parsed.report.rejected) ++by_reason[r.reason];
    report["rejected_by_reason"] = by_reason;
    auto samples = ojson::array();
    for (std::size_t i = 0; i < parsed.report.rejected.size() && i < 20; ++i) {
        const auto& r = parsed.report.rejected[i];
        samples.push_back({{"line", r.line_number}, {"reason", r.reason}, {"raw", r.raw}});
    }
    report["rejected_samples"] = samples;
    report["trips"] = rebuilt.trips.size();
    std::map<std::string, std::size_t> anomalies;
    for (const auto& a : rebuilt.anomalies) ++anomalies[std::string(to_string(a.kind))];
    report["anomalies"] = anomalies;

    write_file_atomic(artifact(c, "records.tsv"), records_text);
    write_file_atomic(artifact(c, "trips.tsv"), format_trips(rebuilt.trips));
    write_file_atomic(artifact(c, "ingest_report.json"), report.dump(2) + "\n");
    spdlog::info("ingest: {} rows in, {} accepted, {} rejected, {} trips, {} anomalies", parsed.report.input_rows,
                 parsed.report.accepted, parsed.report.rejected.size(), rebuilt.trips.size(), rebuilt.anomalies.size());
    if (c.strict && !parsed.report.rejected.empty())
        throw StrictViolation(fmt::format("{} AFC rows rejected", parsed.report.rejected.size()));
}

void stage_delays(const PipelineConfig& c) {
    auto network = load_network(c);
    bool have_table = fs::exists(c.paths.delay_table);
    bool have_logs = fs::exists(c.paths.delay_logs);
    if (!have_table && !have_logs) throw MissingArtifact("synth", c.paths.delay_table);

    DelayTableResult table;
    if (have_table) table = parse_structured_delays(read_file(c.paths.delay_table), &network);
    for (const auto& r : table.rejected) spdlog::warn("delay table line {}: {}", r.line_number, r.reason);
    std::map<int, DelayEvent> by_id;
    for (const auto& e : table.events) by_id[e.event_id] = e;

    std::string extractions;
    std::size_t failures = 0, mismatches = 0;
    std::map<int, DelayEvent> extracted;
    if (have_logs) {
        std::unique_ptr<LlmBackend> backend;
        ExtractionOptions options;
        if (c.extraction_backend == "llm") {
            backend = make_backend(c);
            options.backend = ExtractionBackend::Llm;
            options.llm = backend.get();
        } else if (c.extraction_backend != "rule") {
            throw Error("malformed-config", "extraction_backend must be rule or llm");
        }
        auto narratives = split_narratives(read_file(c.paths.delay_logs));
        for (std::size_t i = 0; i < narratives.size(); ++i) {
            ojson row;
            try {
                auto result = extract_from_log(narratives[i], network, options);
                row = ojson::parse(event_to_json(result.event, &result));
                auto it = by_id.find(result.event.event_id);
                if (it != by_id.end()) {
                    bool same = it->second == result.event;
                    row["matches_table"] = same;
                    mismatches += same ? 0 : 1;
                }
                extracted.emplace(result.event.event_id, result.event);
            } catch (const Error& e) {
                ++failures;
                spdlog::warn("narrative {}: {}", i + 1, e.what());
                row["error"] = e.code();
                row["message"] = e.what();
            }
            row["narrative_index"] = i + 1;
            extractions += row.dump() + "\n";
        }
    }

    std::vector<DelayEvent> events;
    for (const auto& [id, e] : have_table ? by_id : extracted) events.push_back(e);
    write_file_atomic(artifact(c, "events.jsonl"), format_events_jsonl(events));
    write_file_atomic(artifact(c, "narrative_extractions.jsonl"), extractions);
    spdlog::info("delays: {} events ({} table rows rejected), {} narratives extracted, {} failed, {} differ from table",
                 events.size(), table.rejected.size(), extracted.size(), failures, mismatches);
    if (c.strict && (!table.rejected.empty() || failures > 0))
        throw StrictViolation(fmt::format("{} delay rows rejected, {} narratives unextractable", table.rejected.size(),
                                          failures));
}

void stage_mine(const PipelineConfig& c) {
    auto trips = parse_trips(require(artifact(c, "trips.tsv"), "ingest"));
    auto events = load_events(c);
    MiningParams params{c.screen, c.cluster, {}};
    for (const auto& e : events) params.excluded_dates.insert(e.date);
    auto regulars = mine_regulars(trips, params);
    std::vector<TravelPattern> patterns;
    for (const auto& r : regulars) patterns.insert(patterns.end(), r.patterns.begin(), r.patterns.end());
    write_file_atomic(artifact(c, "regulars.tsv"), format_regulars(regulars));
    write_file_atomic(artifact(c, "patterns.tsv"), format_patterns(patterns));
    spdlog::info("mine: {} trips in, {} regulars, {} patterns", trips.size(), regulars.size(), patterns.size());
}

void stage_affected(const PipelineConfig& c) {
    auto patterns = load_patterns(c);
    auto events = load_events(c);
    auto network = load_network(c);
    auto affected = find_affected(patterns, events, network, c.impact);
    write_file_atomic(artifact(c, "affected.jsonl"), format_affected_jsonl(affected));
    spdlog::info("affected: {} patterns x {} events -> {} instances", patterns.size(), events.size(), affected.size());
}

struct Context {
    std::map<std::string, TravelPattern> patterns;
    std::map<int, DelayEvent> events;
};

Context load_context(const PipelineConfig& c) {
    Context ctx;
    for (auto& p : load_patterns(c)) ctx.patterns.emplace(p.key, std::move(p));
    for (auto& e : load_events(c)) ctx.events.emplace(e.event_id, std::move(e));
    return ctx;
}

std::string describe(const std::string& key) { return key; }
std::string describe(int key) { return std::to_string(key); }
std::string describe(const RecordKey& key) { return key.card_id + "/" + std::to_string(key.event_id); }

template <typename Map>
const auto& lookup(const Map& map, const typename Map::key_type& key, const char* what) {
    auto it = map.find(key);
    if (it == map.end()) throw Error("inconsistent-artifacts", fmt::format("unknown {} {}", what, describe(key)));
    return it->second;
}

void stage_label(const PipelineConfig& c) {
    auto affected = parse_affected_jsonl(require(artifact(c, "affected.jsonl"), "affected"));
    auto ctx = load_context(c);
    auto trips = parse_trips(require(artifact(c, "trips.tsv"), "ingest"));
    auto records = parse_afc_text(require(artifact(c, "records.tsv"), "ingest")).records;

    std::set<std::pair<std::string, Date>> wanted;
    for (const auto& inst : affected) wanted.insert({inst.card_id, lookup(ctx.events, inst.event_id, "event").date});
    std::map<std::pair<std::string, Date>, std::vector<Trip>> day_trips;
    for (auto& t : trips) {
        std::pair<std::string, Date> key{t.card_id, date_of(t.entry_time)};
        if (wanted.contains(key)) day_trips[key].push_back(std::move(t));
    }
    std::map<std::pair<std::string, Date>, std::vector<AfcRecord>> day_records;
    for (auto& r : records) {
        std::pair<std::string, Date> key{r.card_id, date_of(r.timestamp)};
        if (wanted.contains(key)) day_records[key].push_back(std::move(r));
    }

    static const std::vector<Trip> kNoTrips;
    static const std::vector<AfcRecord> kNoRecords;
    std::vector<LabelRow> rows;
    std::size_t abandon = 0, conflicts = 0, corroborated = 0;
    for (const auto& inst : affected) {
        const auto& event = lookup(ctx.events, inst.event_id, "event");
        const auto& pattern = lookup(ctx.patterns, inst.pattern_key, "pattern");
        std::pair<std::string, Date> key{inst.card_id, event.date};
        auto ti = day_trips.find(key);
        auto ri = day_records.find(key);
        const auto& dt = ti == day_trips.end() ? kNoTrips : ti->second;
        const auto& dr = ri == day_records.end() ? kNoRecords : ri->second;
        auto outcome = label_choice(dt, dr, pattern, event, c.label);
        LabelRow row{{inst.card_id, inst.event_id}, outcome.label, started_before_delay(dr, pattern, event),
                     outcome.corroborated, outcome.conflict};
        abandon += row.label == ChoiceLabel::Abandon ? 1 : 0;
        conflicts += row.conflict ? 1 : 0;
        corroborated += row.corroborated ? 1 : 0;
        rows.push_back(std::move(row));
    }
    write_file_atomic(artifact(c, "labels.tsv"), format_labels(rows));
    spdlog::info("label: {} instances, {} abandon, {} conflicts, {} with bus corroboration", rows.size(), abandon,
                 conflicts, corroborated);
}

void stage_featurize(const PipelineConfig& c) {
    auto affected = parse_affected_jsonl(require(artifact(c, "affected.jsonl"), "affected"));
    auto labels = parse_labels(require(artifact(c, "labels.tsv"), "label"));
    auto ctx = load_context(c);
    std::map<RecordKey, LabelRow> by_key;
    for (auto& l : labels) by_key.emplace(l.key, std::move(l));

    std::vector<ChoiceRecord> dataset;
    for (const auto& inst : affected) {
        const auto& label = lookup(by_key, RecordKey{inst.card_id, inst.event_id}, "label for");
        auto record = featurize(inst, lookup(ctx.patterns, inst.pattern_key, "pattern"),
                                lookup(ctx.events, inst.event_id, "event"), label.started, c.peaks);
        record.label = label.label;
        dataset.push_back(std::move(record));
    }
    write_file_atomic(artifact(c, "dataset.tsv"), format_dataset(dataset));
    spdlog::info("featurize: {} records with {} event and {} passenger features", dataset.size(), kEventFeatureCount,
                 kPassengerFeatureCount);
}

std::string format_split(const SplitAssignment& split) {
    std::string out = "card_id\tevent_id\tsplit\n";
    for (const auto& k : split.train) out += fmt::format("{}\t{}\ttrain\n", k.card_id, k.event_id);
    for (const auto& k : split.test) out += fmt::format("{}\t{}\ttest\n", k.card_id, k.event_id);
    return out;
}

SplitAssignment parse_split(std::string_view text) {
    SplitAssignment out;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 3 || (f[2] != "train" && f[2] != "test"))
            throw Error("malformed-split", fmt::format("line {}", line_no));
        (f[2] == "train" ? out.train : out.test).push_back({f[0], std::stoi(f[1])});
    }
    return out;
}

std::vector<ChoiceRecord> select(const std::vector<ChoiceRecord>& records, const std::vector<RecordKey>& keys) {
    std::set<RecordKey> wanted(keys.begin(), keys.end());
    std::vector<ChoiceRecord> out;
    for (const auto& r : records)
        if (wanted.contains(r.key())) out.push_back(r);
    return out;
}

std::string predictions_file(const std::string& model) { return "predictions_" + model + ".jsonl"; }

std::vector<Prediction> predict_llm(const PipelineConfig& c, const std::vector<ChoiceRecord>& test,
                                    const std::map<int, DelayEvent>& events) {
    auto backend = make_backend(c);
    PromptTemplate tmpl;
    tmpl.max_cases = std::max<std::size_t>(1, c.predictor.batch_size);
    std::map<int, std::vector<ChoiceRecord>> by_event;
    for (const auto& r : test) {
        auto unlabeled = r;
        unlabeled.label.reset();
        by_event[r.event_id].push_back(std::move(unlabeled));
    }
    std::vector<PromptBundle> bundles;
    for (const auto& [event_id, records] : by_event) {
        const auto& event = lookup(events, event_id, "event");
        for (std::size_t i = 0; i < records.size(); i += tmpl.max_cases) {
            std::vector<ChoiceRecord> batch(records.begin() + static_cast<std::ptrdiff_t>(i),
                                            records.begin() + static_cast<std::ptrdiff_t>(
                                                                  std::min(records.size(), i + tmpl.max_cases)));
            bundles.push_back(build_prompt(batch, event, tmpl));
        }
    }
    auto predictions = run_llm_batches(*backend, bundles);
    std::size_t unresolved = 0;
    for (auto& p : predictions) {
        p.backend = "DelayPTC-LLM/" + p.backend;
        unresolved += p.label ? 0 : 1;
    }
    spdlog::info("predict: DelayPTC-LLM sent {} prompts, {} unresolved", bundles.size(), unresolved);
    return predictions;
}

void stage_predict(const PipelineConfig& c) {
    auto dataset = parse_dataset(require(artifact(c, "dataset.tsv"), "featurize"));
    auto split = split_dataset(dataset, c.split, c.seed);
    write_file_atomic(artifact(c, "split.tsv"), format_split(split));
    auto train = select(dataset, split.train);
    auto test = select(dataset, split.test);
    spdlog::info("predict: {} train, {} test records", train.size(), test.size());

    for (const auto& model : c.predictor.models) {
        std::vector<Prediction> predictions;
        if (model == "DelayPTC-LLM") {
            std::map<int, DelayEvent> events;
            for (auto& e : load_events(c)) events.emplace(e.event_id, std::move(e));
            predictions = predict_llm(c, test, events);
        } else {
            EnsembleParams params;
            if (model == "RF") params.kind = ModelKind::RandomForest;
            else if (model == "GBT") params.kind = ModelKind::GradientBoosted;
            else if (model == "Majority") params.kind = ModelKind::Majority;
            else throw Error("malformed-config", "unknown model " + model);
            params.forest = c.predictor.forest;
            params.boosting = c.predictor.boosting;
            auto fitted = fit_tree_ensemble(train, params, c.seed);
            predictions = predict_with_model(fitted, test);
            spdlog::info("predict: {} fitted with {} trees{}", model, fitted.trees.size(),
                         fitted.degenerate ? " (degenerate)" : "");
        }
        std::sort(predictions.begin(), predictions.end(),
                  [](const Prediction& a, const Prediction& b) { return a.key < b.key; });
        write_file_atomic(artifact(c, predictions_file(model)), format_predictions_jsonl(predictions));
    }
}

void stage_eval(const PipelineConfig& c) {
    auto dataset = parse_dataset(require(artifact(c, "dataset.tsv"), "featurize"));
    auto split = parse_split(require(artifact(c, "split.tsv"), "predict"));
    auto test = select(dataset, split.test);

    std::vector<MetricsReport> reports;
    for (const auto& model : c.predictor.models) {
        auto predictions = parse_predictions_jsonl(require(artifact(c, predictions_file(model)), "predict"));
        auto report = compute_metrics(model, predictions, test);
        check_f1_consistency(report);
        reports.push_back(std::move(report));
    }
    auto table = compare_models(reports);

    std::size_t abandon = std::count_if(test.begin(), test.end(),
                                        [](const ChoiceRecord& r) { return r.label == ChoiceLabel::Abandon; });
    std::string text = fmt::format("Test records: {} ({} Abandon, {} Wait)\n\n", test.size(), abandon,
                                   test.size() - abandon);
    text += table.text;
    for (const auto& r : table.rows)
        if (r.unresolved > 0) text += fmt::format("{}: coverage {}\n", r.model_id, format_decimal(r.coverage, 4));

    ojson report;
    report["test_records"] = test.size();
    report["test_abandon"] = abandon;
    report["models"] = ojson::parse(table.json);

    bool inconsistent = std::any_of(table.rows.begin(), table.rows.end(),
                                    [](const MetricsReport& r) { return r.has_flag("f1-inconsistent"); });
    if (!c.paths.printed_table.empty()) {
        auto printed = parse_printed_table(require(c.paths.printed_table, "external input"));
        for (auto& r : printed) inconsistent |= !check_f1_consistency(r);
        auto audit = compare_models(printed);
        text += "\nPrinted table audit (F1 vs harmonic mean of printed precision and recall, tolerance 0.01)\n";
        text += audit.text;
        report["audit"] = ojson::parse(audit.json);
    }
    write_file_atomic(artifact(c, "report.txt"), text);
    write_file_atomic(artifact(c, "report.json"), report.dump(2) + "\n");
    spdlog::info("eval: {} models on {} test records", reports.size(), test.size());
    if (c.strict && inconsistent) throw StrictViolation("F1 inconsistency flagged");
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& c) {
    if (stage == "synth") return stage_synth(c);
    if (stage == "ingest") return stage_ingest(c);
    if (stage == "delays") return stage_delays(c);
    if (stage == "mine") return stage_mine(c);
    if (stage == "affected") return stage_affected(c);
    if (stage == "label") return stage_label(c);
    if (stage == "featurize") return stage_featurize(c);
    if (stage == "predict") return stage_predict(c);
    if (stage == "eval") return stage_eval(c);
    if (stage == "all") {
        for (const char* s : {"ingest", "delays", "mine", "affected", "label", "featurize", "predict", "eval"})
            run_stage(s, c);
        return;
    }
    throw Error("unknown-stage", stage);
}

int run_stage_status(const std::string& stage, const PipelineConfig& config) {
    try {
        run_stage(stage, config);
        return 0;
    } catch (const MissingArtifact& e) {
        spdlog::error("{}: {}", stage, e.what());
        return 2;
    } catch (const StrictViolation& e) {
        spdlog::error("{}: {}", stage, e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}: {}", stage, e.what());
        return 1;
    }
}

}  // namespace delayptc
