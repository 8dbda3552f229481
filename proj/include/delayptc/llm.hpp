#pragma once

#include "delayptc/common.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace delayptc {

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 2048;
};

struct LlmRequest {
    std::uint64_t id = 0;
    std::string system;
    std::string user;
    DecodeParams params;
};

/// Raised by a backend when the request could not be delivered or answered.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error("transport-failure", message) {}
};

struct BackendLimits {
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds timeout{60000};
    int retry_budget = 3;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    /// Must be safe to call from up to limits().max_in_flight threads at once.
    virtual std::string complete(const LlmRequest& request) = 0;
    virtual std::string id() const = 0;

    const BackendLimits& limits() const { return limits_; }
    void set_limits(const BackendLimits& limits) { limits_ = limits; }

private:
    BackendLimits limits_;
};

/// Deterministic in-process backend driven by a responder function.
class MockBackend : public LlmBackend {
public:
    using Responder = std::function<std::string(const LlmRequest&)>;

    MockBackend(std::string id, Responder responder) : id_(std::move(id)), responder_(std::move(responder)) {}

    std::string complete(const LlmRequest& request) override { return responder_(request); }
    std::string id() const override { return id_; }

private:
    std::string id_;
    Responder responder_;
};

struct MockRuleParams {
    double urgency_threshold = 6.0;  // abandon iff not started, morning peak, p3 below this
};

/// Mock answering both prompt kinds used by the pipeline: delay extraction
/// (by running the rule extractor on the embedded narrative) and choice
/// prediction (by applying the rule to the serialized cases).
std::unique_ptr<LlmBackend> make_rule_mock_backend(const MockRuleParams& params = {});

struct HttpBackendConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key_env = "DELAYPTC_API_KEY";
};

/// OpenAI-compatible chat-completions client. The key is read from the
/// environment once, at construction; a missing key is an error.
std::unique_ptr<LlmBackend> make_http_backend(const HttpBackendConfig& config, const BackendLimits& limits);

/// Runs task(i) for i in [0, count) with at most max_in_flight concurrent
/// calls. Results are stored by index so order never depends on timing. The
/// first exception thrown by any task is rethrown after all workers stop.
template <typename Result>
std::vector<Result> run_bounded(std::size_t count, std::size_t max_in_flight,
                                const std::function<Result(std::size_t)>& task) {
    std::vector<Result> results(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i] = task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::size_t n_workers = std::max<std::size_t>(1, std::min(max_in_flight, count));
    std::vector<std::thread> workers;
    for (std::size_t w = 1; w < n_workers; ++w) workers.emplace_back(worker);
    worker();
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace delayptc
