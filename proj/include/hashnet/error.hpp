#pragma once

#include <stdexcept>
#include <string>

namespace hashnet {

/// Validation and data errors. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values during training. The CLI maps these to exit code 3.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

} // namespace hashnet
