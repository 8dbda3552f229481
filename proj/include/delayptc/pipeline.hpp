#pragma once

#include "delayptc/afc.hpp"
#include "delayptc/choice.hpp"
#include "delayptc/impact.hpp"
#include "delayptc/patterns.hpp"
#include "delayptc/synth.hpp"
#include "delayptc/trees.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace delayptc {

struct PathsConfig {
    std::string network = "data/shenzhen_network.json";
    std::string calendar = "data/calendar.txt";
    std::string afc = "data/afc.tsv";
    std::string delay_table = "data/delays.tsv";
    std::string delay_logs = "data/delay_logs.txt";
    std::string output_dir = "out";
    std::string printed_table;  // optional published comparison table to audit
};

struct PredictorConfig {
    std::string backend = "mock";  // mock | http
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key_env = "DELAYPTC_API_KEY";
    std::size_t max_in_flight = 4;
    int timeout_ms = 60000;
    int retry_budget = 3;
    std::size_t batch_size = 10;
    double temperature = 0.0;
    double mock_urgency_threshold = 6.0;
    std::vector<std::string> models = {"DelayPTC-LLM", "RF", "GBT", "Majority"};
    ForestParams forest;
    BoostingParams boosting;
};

struct SplitConfig {
    std::string mode = "stratified";  // stratified | leave-one-event-out
    double test_share = 0.3;
    int holdout_event = 0;  // leave-one-event-out only
};

struct SynthSettings {
    std::size_t regular_count = 3500;
    std::size_t casual_count = 1500;
    std::string first_day = "2019-08-01";
    std::size_t weekday_count = 41;
    std::vector<int> event_ids = {1, 3, 9, 11, 12, 13};
    double targeted_share = 0.4;
    double abandon_rate = 0.19;
    double noise_rate = 0.0;
    double min_jitter = 3.0;
    double max_jitter = 25.0;
    double high_propensity_weight = 15.0;
};

struct PipelineConfig {
    PathsConfig paths;
    std::uint64_t seed = 42;
    bool strict = false;
    ReconstructParams reconstruct;
    ScreenParams screen;
    ClusterParams cluster;
    ImpactParams impact;
    LabelParams label;
    PeakWindows peaks;
    std::string extraction_backend = "rule";  // rule | llm
    PredictorConfig predictor;
    SplitConfig split;
    SynthSettings synth;
};

std::string config_to_json(const PipelineConfig& config);
/// Keys absent from the default configuration are returned in unknown_keys
/// as dotted paths.
PipelineConfig config_from_json(std::string_view text, std::vector<std::string>* unknown_keys = nullptr);
/// Throws Error("unknown-config-key") in strict mode.
PipelineConfig load_config(const std::filesystem::path& path, bool strict);

WorldConfig world_config(const PipelineConfig& config);

/// A stage input that a previous stage (or the user) should have produced.
class MissingArtifact : public Error {
public:
    MissingArtifact(const std::string& stage, const std::filesystem::path& path)
        : Error("missing-artifact", "missing " + path.string() + " (produced by the '" + stage + "' stage)"),
          stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Raised in strict mode once the stage's outputs are written.
class StrictViolation : public Error {
public:
    explicit StrictViolation(const std::string& message) : Error("strict-violation", message) {}
};

inline constexpr const char* kStageNames[] = {"synth", "ingest", "delays", "mine",    "affected",
                                              "label", "featurize", "predict", "eval", "all"};

/// Runs one stage; "all" chains ingest through eval. Throws MissingArtifact,
/// StrictViolation or Error.
void run_stage(const std::string& stage, const PipelineConfig& config);

/// run_stage with errors mapped to exit codes: 0 ok, 1 other error,
/// 2 missing input artifact, 3 strict-mode validation failure.
int run_stage_status(const std::string& stage, const PipelineConfig& config);

struct LabelRow {
    RecordKey key;
    ChoiceLabel label = ChoiceLabel::Wait;
    bool started = false;
    bool corroborated = false;
    bool conflict = false;
};

std::string format_labels(const std::vector<LabelRow>& rows);
std::vector<LabelRow> parse_labels(std::string_view text);

struct SplitAssignment {
    std::vector<RecordKey> train;
    std::vector<RecordKey> test;
};

/// Stratified by label with a fixed seed, or one event held out.
SplitAssignment split_dataset(const std::vector<ChoiceRecord>& records, const SplitConfig& config, std::uint64_t seed);

}  // namespace delayptc
