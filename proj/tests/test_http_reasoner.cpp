#include <doctest.h>

#include <fstream>

#include "msgnav/errors.hpp"
#include "msgnav/http_reasoner.hpp"
#include "msgnav/key_subgraph.hpp"

using namespace msgnav;
using nlohmann::json;

namespace {

std::string chat_reply(const std::string& content) {
    return json{{"choices",
                 json::array({json{{"message", json{{"role", "assistant"},
                                                    {"content", content}}}}})}}
        .dump();
}

/// Transport stub replaying a canned sequence of results.
class StubTransport : public HttpTransport {
public:
    explicit StubTransport(std::vector<HttpResult> results) : results_(std::move(results)) {}

    HttpResult post(const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                    const std::string& body) override {
        bodies.push_back(body);
        if (calls >= results_.size()) return results_.back();
        return results_[calls++];
    }

    std::size_t calls = 0;
    std::vector<std::string> bodies;

private:
    std::vector<HttpResult> results_;
};

HttpReasonerConfig fast_config() {
    HttpReasonerConfig cfg;
    cfg.endpoint = "http://stubbed";
    cfg.max_retries = 3;
    cfg.backoff_initial_s = 0.0;  // no sleeping in tests
    return cfg;
}

json minimal_request() {
    return json{{"schema_version", 1},
                {"step", 1},
                {"goal", Goal::category("plant").to_json()},
                {"key_subgraph",
                 json{{"objects", json::array()},
                      {"images", json::array({json{{"image", "f000001"},
                                                   {"certifies", json::array()}}})},
                      {"image_count", 1}}},
                {"decision_memory", json::array()},
                {"frontiers", json::array()}};
}

}  // namespace

TEST_SUITE("http_reasoner") {

TEST_CASE("well-formed fenced reply parses into a response") {
    const std::string content =
        "Looking at the key subgraph, the plant is object 5.\n"
        "```json\n"
        "{\"choice\": {\"target\": 5}, \"vocab\": [\"wicker hamper\"], "
        "\"rationale\": \"plant visible\"}\n"
        "```\n";
    auto transport = std::make_unique<StubTransport>(
        std::vector<HttpResult>{{200, chat_reply(content), ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    const ReasonerResponse r = reasoner.decide(minimal_request());
    CHECK(std::get<ChoiceTarget>(r.choice).id == 5);
    CHECK(r.proposed_vocab == std::vector<std::string>{"wicker hamper"});
    CHECK(reasoner.last_attempts() == 1);
}

TEST_CASE("bare JSON content without a fence also parses") {
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {200, chat_reply("{\"choice\": {\"frontier\": 2}}"), ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    CHECK(std::get<ChoiceFrontier>(reasoner.decide(minimal_request()).choice).id == 2);
}

TEST_CASE("reply missing the choice field is a protocol error") {
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {200, chat_reply("{\"rationale\": \"no idea\"}"), ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    CHECK_THROWS_AS(reasoner.decide(minimal_request()), ProtocolError);
}

TEST_CASE("protocol error carries the raw reply after retries") {
    const std::string body = chat_reply("not json at all");
    auto transport =
        std::make_unique<StubTransport>(std::vector<HttpResult>{{200, body, ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    try {
        reasoner.decide(minimal_request());
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(e.raw_reply == body);
    }
    CHECK(reasoner.last_attempts() == 4);  // initial + 3 retries
}

TEST_CASE("transient 5xx then success: two attempts logged") {
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {503, "overloaded", ""},
        {200, chat_reply("{\"choice\": {\"target\": 1}}"), ""}});
    auto* raw = transport.get();
    HttpReasoner reasoner(fast_config(), std::move(transport));
    const ReasonerResponse r = reasoner.decide(minimal_request());
    CHECK(std::get<ChoiceTarget>(r.choice).id == 1);
    CHECK(reasoner.last_attempts() == 2);
    CHECK(raw->calls == 2);
}

TEST_CASE("auth rejection surfaces as a transport error immediately") {
    auto transport =
        std::make_unique<StubTransport>(std::vector<HttpResult>{{401, "unauthorized", ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    CHECK_THROWS_AS(reasoner.decide(minimal_request()), TransportError);
    CHECK(reasoner.last_attempts() == 1);
}

TEST_CASE("transport failures exhaust retries into a transport error") {
    auto transport = std::make_unique<StubTransport>(
        std::vector<HttpResult>{{0, "", "connection refused"}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    CHECK_THROWS_AS(reasoner.decide(minimal_request()), TransportError);
    CHECK(reasoner.last_attempts() == 4);
}

TEST_CASE("request serialization inlines image references for the prompt") {
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {200, chat_reply("{\"choice\": {\"target\": 1}}"), ""}});
    auto* raw = transport.get();
    HttpReasoner reasoner(fast_config(), std::move(transport));
    reasoner.decide(minimal_request());
    REQUIRE(raw->bodies.size() == 1);
    const json body = json::parse(raw->bodies[0]);
    const std::string user = body.at("messages").at(1).at("content").get<std::string>();
    CHECK(user.find("[image:f000001]") != std::string::npos);
    CHECK(body.at("model") == "gpt-4o");
}

TEST_CASE("focus query parses the related id list") {
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {200, chat_reply("```json\n{\"related\": [3, 7]}\n```"), ""}});
    HttpReasoner reasoner(fast_config(), std::move(transport));
    CompactGraph graph;
    graph.nodes = {{3, "chair"}, {7, "plant"}};
    FocusRequest req;
    req.graph = &graph;
    req.goal = Goal::category("plant");
    req.k = 2;
    req.step = 1;
    CHECK(reasoner.focus(req) == std::vector<ObjectId>{3, 7});
}

TEST_CASE("exchange log captures every attempt") {
    const std::string log_path = "/tmp/msgnav_test_exchange.jsonl";
    std::remove(log_path.c_str());
    HttpReasonerConfig cfg = fast_config();
    cfg.exchange_log_path = log_path;
    auto transport = std::make_unique<StubTransport>(std::vector<HttpResult>{
        {503, "busy", ""}, {200, chat_reply("{\"choice\": {\"target\": 1}}"), ""}});
    HttpReasoner reasoner(cfg, std::move(transport));
    reasoner.decide(minimal_request());

    std::ifstream in(log_path);
    REQUIRE(in.good());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            CHECK_NOTHROW(json::parse(line));
            ++lines;
        }
    }
    CHECK(lines == 2);
    std::remove(log_path.c_str());
}

}  // TEST_SUITE
