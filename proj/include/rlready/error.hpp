// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rlready {

// Input or schema validation failure. The CLI maps this to exit status 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A numeric precondition was violated (k > n, degenerate x, ...).
class DomainError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// File system or network failure. The CLI maps this to exit status 2.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The sampler finished with some tasks permanently failed.
class PartialCompletionError : public IoError {
public:
  PartialCompletionError(const std::string &what, std::string failures_path, std::size_t written)
      : IoError(what), failures_path_(std::move(failures_path)), written_(written) {}

  const std::string &failures_path() const noexcept { return failures_path_; }
  std::size_t written() const noexcept { return written_; }

private:
  std::string failures_path_;
  std::size_t written_;
};

} // namespace rlready
