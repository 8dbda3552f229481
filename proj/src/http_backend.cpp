#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "delayptc/llm.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <regex>

namespace delayptc {

namespace {

class HttpBackend : public LlmBackend {
public:
    HttpBackend(const HttpBackendConfig& config, std::string key) : config_(config), key_(std::move(key)) {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(config.endpoint, m, url_re))
            throw Error("invalid-endpoint", "cannot parse endpoint " + config.endpoint);
        base_ = m[1];
        path_ = m[2].matched ? m[2].str() : "/";
    }

    std::string complete(const LlmRequest& request) override {
        nlohmann::json body;
        body["model"] = config_.model;
        body["temperature"] = request.params.temperature;
        body["max_tokens"] = request.params.max_tokens;
        body["messages"] = nlohmann::json::array();
        if (!request.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", request.system}});
        body["messages"].push_back({{"role", "user"}, {"content", request.user}});

        // One client per call keeps concurrent requests independent.
        httplib::Client client(base_);
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(limits().timeout);
        auto micros = std::chrono::duration_cast<std::chrono::microseconds>(limits().timeout - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        httplib::Headers headers{{"Authorization", "Bearer " + key_}};

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransportError(fmt::format("request {}: {}", request.id, httplib::to_string(res.error())));
        if (res->status < 200 || res->status >= 300)
            throw TransportError(fmt::format("request {}: HTTP {}", request.id, res->status));
        try {
            auto reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(fmt::format("request {}: malformed response: {}", request.id, e.what()));
        }
    }

    std::string id() const override { return "http:" + config_.model; }

private:
    HttpBackendConfig config_;
    std::string key_;
    std::string base_;
    std::string path_;
};

}  // namespace

std::unique_ptr<LlmBackend> make_http_backend(const HttpBackendConfig& config, const BackendLimits& limits) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) throw Error("missing-api-key", "environment variable " + config.api_key_env + " is not set");
    auto backend = std::make_unique<HttpBackend>(config, key);
    backend->set_limits(limits);
    return backend;
}

}  // namespace delayptc
