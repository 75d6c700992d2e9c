#pragma once

// HTTP-backed oracle adapter speaking the chat completions protocol. Each of
// the two chained prompts runs in a fresh conversation; the transport is a
// plain function so tests can substitute a stub without a network.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <thread>

#include <nlohmann/json.hpp>

#include "verihtn/oracle.hpp"

namespace verihtn {

struct TransportError {
    std::string message;
};

// Raw reply body on success.
using TransportResult = std::variant<std::string, TransportError>;
using Transport = std::function<TransportResult(const nlohmann::json& payload)>;

struct LiveConfig {
    std::string api_key;
    std::string base_url = "https://api.openai.com";
    std::string endpoint = "/v1/chat/completions";
    std::string model = "gpt-4-turbo";
    double temperature = 1.0;
    int timeout_seconds = 30;
    int transport_retries = 3;
    int backoff_ms = 250;
    ParsePolicy policy = ParsePolicy::Salvage;
};

// Environment override wins over the generic variable so one shell can hold
// both without conflict.
inline std::string env_or(const char* primary, const char* fallback,
                          const std::string& dflt) {
    if (const char* v = std::getenv(primary); v && *v) return v;
    if (fallback) {
        if (const char* v = std::getenv(fallback); v && *v) return v;
    }
    return dflt;
}

inline LiveConfig live_config_from_env() {
    LiveConfig cfg;
    cfg.api_key = env_or("VERIHTN_API_KEY", "OPENAI_API_KEY", "");
    cfg.base_url = env_or("VERIHTN_BASE_URL", nullptr, cfg.base_url);
    cfg.model = env_or("VERIHTN_MODEL", nullptr, cfg.model);
    const std::string temp = env_or("VERIHTN_TEMPERATURE", nullptr, "");
    if (!temp.empty()) cfg.temperature = std::stod(temp);
    return cfg;
}

// Defined in llm_transport.hpp to keep the heavyweight HTTP header out of
// translation units that only need the types above.
Transport make_http_transport(const LiveConfig& cfg);

class LlmOracle : public OraclePort {
public:
    LlmOracle(LiveConfig cfg, Transport transport)
        : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

    OracleResult decompose(const OracleRequest& req, int) override {
        std::string stage1_reply;
        if (auto err = complete(prompt::stage1_user(req), stage1_reply)) return *err;
        std::string stage2_reply;
        if (auto err = complete(prompt::stage2_user(req, stage1_reply), stage2_reply)) {
            return *err;
        }
        ParseReport report = parse_oracle_reply(*req.domain, stage2_reply);
        if (!report.accepted(cfg_.policy)) {
            std::string msg = "reply not parseable under " +
                              std::string(parse_policy_name(cfg_.policy)) + " policy";
            for (const RejectedLine& r : report.rejected) {
                msg += "; " + std::string(rejection_name(r.reason)) + ": " + r.text;
            }
            return OracleFailure{OracleFailureKind::Unparseable, msg};
        }
        OracleResponse resp;
        resp.tasks = std::move(report.tasks);
        resp.raw_stage1 = stage1_reply;
        resp.raw_stage2 = stage2_reply;
        resp.source = "live";
        return resp;
    }

    bool varies_per_attempt() const override { return true; }

private:
    // Runs one single-turn conversation; retries transport errors with backoff.
    std::optional<OracleFailure> complete(const std::string& user_content, std::string& out) {
        nlohmann::json payload;
        payload["model"] = cfg_.model;
        payload["temperature"] = cfg_.temperature;
        payload["messages"] = nlohmann::json::array(
            {{{"role", "system"}, {"content", kSystemPrompt}},
             {{"role", "user"}, {"content", user_content}}});
        std::string last_error;
        for (int attempt = 0; attempt < std::max(1, cfg_.transport_retries); ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_ms * (1 << (attempt - 1))));
            }
            TransportResult r = transport_(payload);
            if (const TransportError* e = std::get_if<TransportError>(&r)) {
                last_error = e->message;
                continue;
            }
            const std::string& body = std::get<std::string>(r);
            try {
                nlohmann::json j = nlohmann::json::parse(body);
                out = j.at("choices").at(0).at("message").at("content").get<std::string>();
                return std::nullopt;
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("malformed completion body: ") + e.what();
            }
        }
        return OracleFailure{OracleFailureKind::Transport, last_error};
    }

    LiveConfig cfg_;
    Transport transport_;
};

} // namespace verihtn
