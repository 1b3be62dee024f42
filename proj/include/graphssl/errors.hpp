#pragma once

#include <stdexcept>
#include <string>

namespace graphssl {

// Shape or dimension disagreement between tensors/operators.
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input that is syntactically fine but numerically unusable (zero-norm vector,
// all-masked-rows-skipped, ...).
struct DegenerateInputError : std::invalid_argument {
    explicit DegenerateInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A caller broke an operation's contract (empty batch, non-scalar loss, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite values produced or supplied.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corpus file could not be parsed; carries the line number in the message.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A single claim record is invalid; carries the claim_id in the message.
struct RecordError : std::runtime_error {
    explicit RecordError(const std::string& msg) : std::runtime_error(msg) {}
    RecordError(const std::string& claim_id, const std::string& msg)
        : std::runtime_error("claim '" + claim_id + "': " + msg) {}
};

// A class is too small to stratify at the requested sizes.
struct StratifyError : std::runtime_error {
    explicit StratifyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (unknown key, type mismatch, invariant violation).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace graphssl
