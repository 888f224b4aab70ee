#ifndef IGEN_ERROR_HPP_
#define IGEN_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace igen {

// Exit codes used by the CLI. Library code throws the matching exception.
enum ExitCode {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitNumericError = 2,
  kExitBudgetExhausted = 3,
  kExitIoError = 4,
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BudgetError : std::runtime_error {
  explicit BudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace igen

#endif  // IGEN_ERROR_HPP_
