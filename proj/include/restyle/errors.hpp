#pragma once

#include <stdexcept>
#include <string>

namespace restyle {

// Bad configuration values (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated operation contract, e.g. shape mismatch (CLI exit code 1).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace restyle
