#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "msgnav/reasoning.hpp"

namespace msgnav {

/// Chat-completions style endpoint configuration. The API key is read
/// from the environment variable named by api_key_env; when unset, no
/// Authorization header is sent (local endpoints).
struct HttpReasonerConfig {
    std::string endpoint;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "MSGNAV_API_KEY";
    int max_retries = 3;
    double backoff_initial_s = 0.5;
    double backoff_factor = 2.0;
    double timeout_s = 60.0;
    std::string exchange_log_path;  // optional JSONL of raw exchanges
};

struct HttpResult {
    int status = 0;          // 0 means transport failure
    std::string body;
    std::string error;       // transport failure description
};

/// Pluggable POST transport so tests can stub the wire.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& endpoint,
                                                      double timeout_s);

/// Reasoner backed by a chat-completions HTTP endpoint. Serializes the
/// request document into a prompt, expects the model to answer with a
/// fenced JSON block, and retries transient failures (5xx, 429, transport
/// errors, malformed replies) with exponential backoff. Auth and transport
/// failures surface as TransportError; unparseable replies after retries
/// surface as ProtocolError carrying the raw reply.
class HttpReasoner : public Reasoner {
public:
    explicit HttpReasoner(HttpReasonerConfig config,
                          std::unique_ptr<HttpTransport> transport = nullptr);

    std::vector<ObjectId> focus(const FocusRequest& request) override;
    ReasonerResponse decide(const nlohmann::json& request) override;

    /// Attempts used by the most recent call (for tests and diagnostics).
    int last_attempts() const { return last_attempts_; }

    /// Extracts the payload from a raw chat-completions reply body:
    /// choices[0].message.content, then the fenced ```json block (or the
    /// whole content when no fence is present). Exposed for fixture tests.
    static nlohmann::json parse_reply_payload(const std::string& body);

private:
    nlohmann::json call(const std::string& system_prompt, const std::string& user_text);
    void log_exchange(const nlohmann::json& entry) const;

    HttpReasonerConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    int last_attempts_ = 0;
};

}  // namespace msgnav
