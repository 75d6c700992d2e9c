#pragma once

// The real HTTP transport, split out because httplib.h is heavy. Include
// this only from translation units that actually open connections.

#include <httplib.h>

#include "verihtn/llm_client.hpp"

namespace verihtn {

inline Transport make_http_transport(const LiveConfig& cfg) {
    return [cfg](const nlohmann::json& payload) -> TransportResult {
        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg.api_key);
        }
        auto res = client.Post(cfg.endpoint, headers, payload.dump(), "application/json");
        if (!res) {
            return TransportError{"connection failed: " + httplib::to_string(res.error())};
        }
        if (res->status != 200) {
            return TransportError{"http status " + std::to_string(res->status) + ": " + res->body};
        }
        return res->body;
    };
}

} // namespace verihtn
