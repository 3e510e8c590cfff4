#pragma once

#include <stdexcept>
#include <string>

namespace fossa {

inline constexpr const char* kVersion = "0.1.0";

// Invalid user-facing input: bad config values, malformed files, shape
// mismatches at API boundaries. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown at runtime: divergence, non-finite intermediates,
// singular terms. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fossa
