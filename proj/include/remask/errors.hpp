#pragma once

#include <stdexcept>
#include <string>

namespace remask {

// Rejected input at an API boundary (bad prompt, bad config, bad scenario file).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A caller broke a precondition that the engine relies on, e.g. a posterior
// that does not cover a masked position.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class OracleErrorKind {
    transport,
    malformed_response,
    vocab_mismatch,
};

class OracleError : public std::runtime_error {
public:
    OracleError(OracleErrorKind kind, const std::string & what)
        : std::runtime_error(what), kind_(kind) {}

    OracleErrorKind kind() const noexcept { return kind_; }

private:
    OracleErrorKind kind_;
};

} // namespace remask
