#include "promptsteer/remote.hpp"

#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "promptsteer/errors.hpp"

namespace promptsteer {

RemoteResponder::RemoteResponder(std::string endpoint, std::shared_ptr<const Vocab> vocab,
                                 std::chrono::milliseconds timeout, int max_retries)
    : endpoint_(std::move(endpoint)), vocab_(std::move(vocab)), timeout_(timeout),
      max_retries_(max_retries) {
    if (timeout_.count() <= 0) throw std::invalid_argument("remote: timeout must be > 0");
    if (max_retries_ < 0) throw std::invalid_argument("remote: max_retries must be >= 0");
    if (!vocab_) throw std::invalid_argument("remote: vocab required");
}

TokenSeq RemoteResponder::respond(const TokenSeq& input, std::uint64_t seed) const {
    nlohmann::json request = {
        {"input", render(input, *vocab_)},
        {"seed", seed},
    };
    std::string body = request.dump();

    std::string reply;
    int attempts = 0;
    bool ok = false;
    std::string last_error;
    while (attempts < max_retries_ + 1) {
        ++attempts;
        // Fresh client per attempt: keeps the responder shareable across threads.
        httplib::Client client(endpoint_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        auto res = client.Post("/respond", body, "application/json");
        if (!res) {
            last_error = "connection error (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        reply = res->body;
        ok = true;
        break;
    }
    if (!ok)
        throw TransportError("remote responder " + endpoint_ + " failed after " +
                                 std::to_string(attempts) + " attempt(s): " + last_error,
                             attempts);

    nlohmann::json parsed = nlohmann::json::parse(reply, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("response") ||
        !parsed["response"].is_string())
        throw ProtocolError("remote responder " + endpoint_ +
                            " returned a malformed body: " + reply.substr(0, 200));
    return tokenize(parsed["response"].get<std::string>(), *vocab_);
}

}  // namespace promptsteer
