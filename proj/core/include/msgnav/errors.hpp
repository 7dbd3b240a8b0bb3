#pragma once

#include <stdexcept>
#include <string>

namespace msgnav {

/// Base class for all msgnav-specific failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration, scene file, or script (operator input).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Internal store corruption, e.g. an edge whose images are missing from
/// the association map. Indicates a bug, not bad input.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// The reasoner replied, but the reply does not follow the response schema.
/// Carries the raw reply for diagnosis.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string raw_reply)
        : Error(what), raw_reply(std::move(raw_reply)) {}
    explicit ProtocolError(const std::string& what) : Error(what) {}

    std::string raw_reply;
};

/// Network / auth failure talking to a remote reasoner endpoint.
class TransportError : public Error {
public:
    using Error::Error;
};

/// No traversable candidate viewpoint exists on any sampling ring.
class NoViewpointError : public Error {
public:
    using Error::Error;
};

}  // namespace msgnav
