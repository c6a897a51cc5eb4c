#pragma once

#include <stdexcept>
#include <string>

namespace metatune {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed records, out-of-range parameters, contract violations.
// The CLI maps this family to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A test-set instance leaked into a training-side context.
class LeakageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A persisted artifact failed its digest or schema check.
class CorruptionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Backend trouble: network, auth, exhausted retries. CLI exit code 3.
class ProviderError : public Error {
public:
    using Error::Error;
};

class AuthError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

// A replayed request whose digest is not in the loaded archive.
class ScriptedMissError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

}  // namespace metatune
