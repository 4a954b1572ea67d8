#pragma once

#include <stdexcept>
#include <string>

namespace promptsteer {

// Exit codes used by the CLI. Each error family gets its own code so batch
// scripts can tell a bad config from a dead responder.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitBadConfig = 2,
    kExitMissingFile = 3,
    kExitResponder = 4,
    kExitMergeConflict = 5,
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFileError : std::runtime_error {
    explicit MissingFileError(const std::string& path)
        : std::runtime_error("missing file: " + path), path(path) {}
    std::string path;
};

// Transport-level failure talking to a remote responder (connect error,
// timeout, non-200 status). Carries how many attempts were made.
struct TransportError : std::runtime_error {
    TransportError(const std::string& what, int attempts)
        : std::runtime_error(what), attempts(attempts) {}
    int attempts = 0;
};

// The remote answered but the body did not match the protocol.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MergeConflictError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace promptsteer
