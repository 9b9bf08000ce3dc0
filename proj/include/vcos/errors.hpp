#pragma once

#include <stdexcept>
#include <string>

namespace vcos {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (bad magic, truncated payload, undecodable image).
class FormatError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Fewer than three usable correspondences, or all of them collinear.
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UnsupportedCombination : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Raised by model providers. retriable() is true for transport-level failures.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, bool retriable) : Error(what), retriable_(retriable) {}
    bool retriable() const noexcept { return retriable_; }

private:
    bool retriable_;
};

class TransportError : public ProviderError {
public:
    explicit TransportError(const std::string& what) : ProviderError(what, true) {}
};

class MalformedResponse : public ProviderError {
public:
    explicit MalformedResponse(const std::string& what) : ProviderError(what, false) {}
};

class UnknownReference : public ProviderError {
public:
    explicit UnknownReference(const std::string& what) : ProviderError(what, false) {}
};

}  // namespace vcos
