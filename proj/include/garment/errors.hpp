#pragma once

#include <stdexcept>
#include <string>

namespace garment {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

// Malformed configuration or command line.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

// Input data that violates a contract: bad files, topology mismatch, sizes.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

// OBJ/document parse failure carrying the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(const std::string& file, int line, const std::string& what);
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Singular transforms, non-finite energies, solver breakdown.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::Numerical, what) {}
};

const char* category_name(ErrorCategory category) noexcept;

}  // namespace garment
