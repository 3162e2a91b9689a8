#pragma once

#include <stdexcept>
#include <string>

namespace advaug {

// Bad user input: flags, file contents, incompatible model/data shapes.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf construction, domain violations, diverged optimization.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace advaug
