#pragma once

#include <stdexcept>
#include <string>

namespace casemix {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

// Caller broke an interface contract (length mismatch, too few samples, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// A metric is undefined for the given data, e.g. sensitivity without positives.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class UnfittableError : public Error {
public:
    using Error::Error;
};

class SeparationError : public Error {
public:
    using Error::Error;
};

// Shifted distribution puts mass outside the original support.
class TransportViolation : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class NonInformativeBaselineError : public Error {
public:
    using Error::Error;
};

class DegenerateVarianceError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace casemix
