#pragma once

#include <stdexcept>
#include <string>

namespace ucc2cc {

// Base of every error the engine raises. Each subclass maps onto one CLI
// exit code (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonCanonicalInput : public Error {
public:
    using Error::Error;
};

class AngleOutOfDomain : public Error {
public:
    using Error::Error;
};

class UnassignedAngle : public Error {
public:
    using Error::Error;
};

class SeriesDivergence : public Error {
public:
    using Error::Error;
};

class DimensionTooLarge : public Error {
public:
    using Error::Error;
};

class ReferenceDepleted : public Error {
public:
    using Error::Error;
};

class RankOverflow : public Error {
public:
    using Error::Error;
};

class EdgeCaseMutualMatch : public Error {
public:
    using Error::Error;
};

class NormalizationStuck : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

} // namespace ucc2cc
