#pragma once

#include <stdexcept>
#include <string>

namespace covest {

// Bad input: violated precondition, malformed config, inconsistent dimensions.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Input was well-formed but the computation could not be carried out
// (no root in bracket, matrix lost definiteness, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace covest
