#ifndef SECTRA_ERRORS_HPP_
#define SECTRA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sectra {

// Error taxonomy mirrors the CLI exit codes: usage -> 2, data -> 3, numeric -> 4.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& message) : std::runtime_error(message) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& message) : std::runtime_error(message) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace sectra

#endif  // SECTRA_ERRORS_HPP_
