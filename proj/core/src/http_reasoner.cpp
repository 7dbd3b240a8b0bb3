#include "msgnav/http_reasoner.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "msgnav/errors.hpp"
#include "msgnav/key_subgraph.hpp"

namespace msgnav {

using nlohmann::json;

namespace {

constexpr const char* kDecideSystemPrompt =
    "You are the exploration decision module of an embodied navigation agent. "
    "You receive a JSON document with the goal, a key subgraph of the scene "
    "(objects plus edge images, referenced as [image:<ref>]), recent decision "
    "memory, and the current exploration frontiers. Decide whether to go to a "
    "known object or to explore a frontier. Reply with a single fenced JSON "
    "block of the form:\n"
    "```json\n"
    "{\"choice\": {\"target\": <object id>} or {\"frontier\": <frontier id>}, "
    "\"vocab\": [<novel category names worth detecting>], "
    "\"rationale\": \"<one sentence>\"}\n"
    "```";

constexpr const char* kFocusSystemPrompt =
    "You are ranking objects of a 3D scene graph by relevance to a navigation "
    "goal. You receive the graph as JSON (nodes with id and category, plus an "
    "adjacency list) and the goal. Reply with a single fenced JSON block:\n"
    "```json\n"
    "{\"related\": [<up to k object ids, most relevant first>]}\n"
    "```";

class HttplibTransport : public HttpTransport {
public:
    HttplibTransport(const std::string& endpoint, double timeout_s) : client_(endpoint) {
        const auto seconds = std::chrono::milliseconds(
            static_cast<long long>(timeout_s * 1000.0));
        client_.set_connection_timeout(seconds);
        client_.set_read_timeout(seconds);
        client_.set_write_timeout(seconds);
    }

    HttpResult post(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
        httplib::Headers hs;
        for (const auto& [k, v] : headers) hs.emplace(k, v);
        auto res = client_.Post(path, hs, body, "application/json");
        if (!res) {
            return {0, "", httplib::to_string(res.error())};
        }
        return {res->status, res->body, ""};
    }

private:
    httplib::Client client_;
};

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& endpoint,
                                                      double timeout_s) {
    return std::make_unique<HttplibTransport>(endpoint, timeout_s);
}

HttpReasoner::HttpReasoner(HttpReasonerConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (!transport_) {
        if (config_.endpoint.empty()) throw ConfigError("http reasoner: endpoint required");
        transport_ = make_httplib_transport(config_.endpoint, config_.timeout_s);
    }
}

json HttpReasoner::parse_reply_payload(const std::string& body) {
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception&) {
        throw ProtocolError("reply body is not JSON", body);
    }
    std::string content;
    try {
        content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw ProtocolError("reply missing choices[0].message.content", body);
    }

    std::string payload = content;
    auto fence = content.find("```");
    if (fence != std::string::npos) {
        auto start = content.find('\n', fence);
        if (start == std::string::npos) throw ProtocolError("malformed code fence", body);
        ++start;
        const auto end = content.find("```", start);
        if (end == std::string::npos) throw ProtocolError("unterminated code fence", body);
        payload = content.substr(start, end - start);
    }
    try {
        return json::parse(payload);
    } catch (const json::exception&) {
        throw ProtocolError("reply content is not a JSON payload", body);
    }
}

void HttpReasoner::log_exchange(const json& entry) const {
    if (config_.exchange_log_path.empty()) return;
    std::ofstream out(config_.exchange_log_path, std::ios::app);
    out << entry.dump() << "\n";
}

json HttpReasoner::call(const std::string& system_prompt, const std::string& user_text) {
    json body{{"model", config_.model},
              {"messages", json::array({json{{"role", "system"}, {"content", system_prompt}},
                                        json{{"role", "user"}, {"content", user_text}}})}};

    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    const std::string body_str = body.dump();
    double backoff = config_.backoff_initial_s;
    std::string last_failure;
    std::string last_body;
    bool last_was_protocol = false;

    last_attempts_ = 0;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0 && backoff > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= config_.backoff_factor;
        }
        ++last_attempts_;
        const HttpResult res = transport_->post(config_.path, headers, body_str);
        log_exchange(json{{"attempt", attempt},
                          {"request", body},
                          {"status", res.status},
                          {"body", res.body},
                          {"error", res.error}});

        if (res.status == 0) {
            last_failure = "transport failure: " + res.error;
            last_was_protocol = false;
            continue;
        }
        if (res.status == 401 || res.status == 403) {
            throw TransportError("reasoner endpoint rejected credentials (HTTP " +
                                 std::to_string(res.status) + ")");
        }
        if (retryable_status(res.status)) {
            last_failure = "HTTP " + std::to_string(res.status);
            last_was_protocol = false;
            continue;
        }
        if (res.status != 200) {
            throw TransportError("reasoner endpoint returned HTTP " +
                                 std::to_string(res.status));
        }
        try {
            return parse_reply_payload(res.body);
        } catch (const ProtocolError& e) {
            // models frequently fix their formatting on a retry
            last_failure = e.what();
            last_body = res.body;
            last_was_protocol = true;
        }
    }
    if (last_was_protocol) {
        throw ProtocolError("reasoner protocol error after " +
                                std::to_string(last_attempts_) + " attempts: " + last_failure,
                            last_body);
    }
    throw TransportError("reasoner unreachable after " + std::to_string(last_attempts_) +
                         " attempts: " + last_failure);
}

std::vector<ObjectId> HttpReasoner::focus(const FocusRequest& request) {
    json doc{{"graph", request.graph->to_json()},
             {"goal", request.goal.to_json()},
             {"k", request.k},
             {"step", request.step}};
    const json payload = call(kFocusSystemPrompt, doc.dump(2));
    if (!payload.contains("related")) {
        throw ProtocolError("focus reply missing 'related'", payload.dump());
    }
    return payload.at("related").get<std::vector<ObjectId>>();
}

ReasonerResponse HttpReasoner::decide(const json& request) {
    std::string user_text = request.dump(2);
    if (request.contains("key_subgraph") && request.at("key_subgraph").contains("images")) {
        std::string refs;
        for (const auto& img : request.at("key_subgraph").at("images")) {
            refs += " [image:" + img.at("image").get<std::string>() + "]";
        }
        if (!refs.empty()) user_text += "\n\nImages referenced:" + refs;
    }
    return ReasonerResponse::from_json(call(kDecideSystemPrompt, user_text));
}

}  // namespace msgnav
