#ifndef CARSHARE_ERRORS_HPP
#define CARSHARE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace carshare {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input could not be read at all.
class IoError : public Error {
public:
    using Error::Error;
};

// Input was readable but malformed (bad header, unknown key, bad value).
class FormatError : public Error {
public:
    using Error::Error;
};

// Data pieces that must agree with each other do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Routing chain is not irreducible; no unique stationary solution.
class ErgodicityError : public Error {
public:
    using Error::Error;
};

// Scaled convolution left the representable range.
class NumericalRangeError : public Error {
public:
    using Error::Error;
};

// State space too large for exact enumeration.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Relocation queue has no equilibrium (zeta >= 1).
class UnstableQueueError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Estimation produced no usable station set.
class EmptyNetworkError : public Error {
public:
    using Error::Error;
};

} // namespace carshare

#endif
