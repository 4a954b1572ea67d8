#include <doctest.h>

#include <atomic>
#include <memory>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "promptsteer/errors.hpp"
#include "promptsteer/remote.hpp"

using namespace promptsteer;

namespace {

// Scripted HTTP server living for one test scope.
struct MockServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server.Post("/respond", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockServer() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("remote round trip against an echo server") {
    auto vocab = std::make_shared<Vocab>(test::make_vocab());
    MockServer mock([](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("input"));
        REQUIRE(body.contains("seed"));
        nlohmann::json reply = {{"response", body["input"].get<std::string>()}};
        res.set_content(reply.dump(), "application/json");
    });
    RemoteResponder remote(mock.endpoint(), vocab, std::chrono::milliseconds(2000), 1);
    TokenSeq input = tokenize("alpha beta planet", *vocab);
    CHECK(remote.respond(input, 7) == input);
}

TEST_CASE("two failures then success within the retry budget") {
    auto vocab = std::make_shared<Vocab>(test::make_vocab());
    std::atomic<int> hits{0};
    MockServer mock([&hits](const httplib::Request&, httplib::Response& res) {
        int n = ++hits;
        if (n <= 2) {
            res.status = 500;
            res.set_content("overloaded", "text/plain");
            return;
        }
        res.set_content(R"({"response": "gamma delta"})", "application/json");
    });
    RemoteResponder remote(mock.endpoint(), vocab, std::chrono::milliseconds(2000), 3);
    TokenSeq got = remote.respond(tokenize("alpha", *vocab), 1);
    CHECK(got == tokenize("gamma delta", *vocab));
    CHECK(hits == 3);
}

TEST_CASE("transport failure after exhausting retries carries the attempt count") {
    auto vocab = std::make_shared<Vocab>(test::make_vocab());
    std::atomic<int> hits{0};
    MockServer mock([&hits](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    RemoteResponder remote(mock.endpoint(), vocab, std::chrono::milliseconds(2000), 2);
    try {
        remote.respond(tokenize("alpha", *vocab), 1);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts == 3);  // 1 try + 2 retries
        CHECK(hits == 3);
    }
}

TEST_CASE("malformed bodies are protocol errors, not transport errors") {
    auto vocab = std::make_shared<Vocab>(test::make_vocab());
    SUBCASE("truncated json") {
        MockServer mock([](const httplib::Request&, httplib::Response& res) {
            res.set_content("{", "application/json");
        });
        RemoteResponder remote(mock.endpoint(), vocab, std::chrono::milliseconds(2000), 0);
        CHECK_THROWS_AS(remote.respond({0}, 1), ProtocolError);
    }
    SUBCASE("missing response field") {
        MockServer mock([](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"reply": "hi"})", "application/json");
        });
        RemoteResponder remote(mock.endpoint(), vocab, std::chrono::milliseconds(2000), 0);
        CHECK_THROWS_AS(remote.respond({0}, 1), ProtocolError);
    }
}

TEST_CASE("unreachable endpoint fails with a transport error") {
    auto vocab = std::make_shared<Vocab>(test::make_vocab());
    // Reserved port with nothing listening.
    RemoteResponder remote("http://127.0.0.1:1", vocab, std::chrono::milliseconds(200), 1);
    CHECK_THROWS_AS(remote.respond({0}, 1), TransportError);
}
