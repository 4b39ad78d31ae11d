#pragma once

#include <stdexcept>
#include <string>

namespace dmpkit {

// Error categories map onto process exit codes: ParseError -> 1 (bad input
// data), ConfigError -> 2 (bad invocation/configuration), NumericError -> 3
// (computation failed to produce a usable result).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmpkit
