#pragma once

#include <stdexcept>
#include <string>

namespace tmsym {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid mesh or group construction (bad generator, open surface, ...).
class ConstructionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Solver breakdown, indefinite operator, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace tmsym
