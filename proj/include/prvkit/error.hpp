#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prvkit
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InvalidModelError : public Error
{
public:
    using Error::Error;
};

/// An operation was attempted in a lifecycle phase that does not accept it.
class LifecycleError : public Error
{
public:
    using Error::Error;
};

class IdentityRangeError : public Error
{
public:
    using Error::Error;
};

class RegistryConflictError : public Error
{
public:
    using Error::Error;
};

class ScopeMismatchError : public Error
{
public:
    using Error::Error;
};

class UnknownStateError : public Error
{
public:
    using Error::Error;
};

class CausalityError : public Error
{
public:
    using Error::Error;
};

/// Raised when a per-thread buffer would receive a timestamp older than its last one.
class ClockError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t line)
    : Error(what + " at line " + std::to_string(line)), line_(line)
    {
    }

    std::size_t line() const noexcept
    {
        return line_;
    }

private:
    std::size_t line_;
};

class InvalidBundleError : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

class SamplerLifecycleError : public Error
{
public:
    using Error::Error;
};

class SamplerModeError : public Error
{
public:
    using Error::Error;
};

class AnalysisError : public Error
{
public:
    using Error::Error;
};

class EmptySeriesError : public AnalysisError
{
public:
    using AnalysisError::AnalysisError;
};

class DegenerateWindowError : public AnalysisError
{
public:
    using AnalysisError::AnalysisError;
};

} // namespace prvkit
