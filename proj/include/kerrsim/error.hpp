#pragma once

#include <stdexcept>
#include <string>

namespace kerrsim {

// Invalid caller input: bad cutoff, out-of-range quantum number, malformed config.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Requested state or operator does not fit in the truncated Fock space.
class TruncationError : public std::runtime_error {
public:
    TruncationError(const std::string& what, int suggested_cutoff)
        : std::runtime_error(what), suggested_cutoff_(suggested_cutoff) {}

    int suggested_cutoff() const noexcept { return suggested_cutoff_; }

private:
    int suggested_cutoff_;
};

// Numerical precondition failed (non-Hermitian input, ambiguous state assignment, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kerrsim
