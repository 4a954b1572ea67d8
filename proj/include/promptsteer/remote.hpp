#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "promptsteer/responders.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// Adapter for API-only conversational models. Speaks
//   POST {endpoint}/respond  {"input": "<text>", "seed": n}
// and expects {"response": "<text>"} with status 200. Anything else is a
// transport failure and is retried up to max_retries times; a 200 body that
// is not the expected JSON is a protocol error. Each call opens its own
// connection, so concurrent rollout workers can share one instance.
class RemoteResponder : public BlackBoxResponder {
public:
    RemoteResponder(std::string endpoint, std::shared_ptr<const Vocab> vocab,
                    std::chrono::milliseconds timeout = std::chrono::milliseconds(5000),
                    int max_retries = 3);

    TokenSeq respond(const TokenSeq& input, std::uint64_t seed) const override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    std::shared_ptr<const Vocab> vocab_;
    std::chrono::milliseconds timeout_;
    int max_retries_;
};

}  // namespace promptsteer
