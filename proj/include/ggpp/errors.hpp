#pragma once

#include <stdexcept>
#include <string>

namespace ggpp {

// Error taxonomy shared across modules. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 1.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

struct BoundsError : std::out_of_range {
    explicit BoundsError(const std::string& msg) : std::out_of_range(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConflictError : std::runtime_error {
    explicit ConflictError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateVectorError : std::runtime_error {
    explicit DegenerateVectorError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ggpp
