#pragma once

#include <stdexcept>
#include <string>

namespace mbsr {

/// Raised for every recoverable failure in the library: malformed input,
/// violated preconditions, I/O problems.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mbsr
