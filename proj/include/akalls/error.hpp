#pragma once

#include <stdexcept>
#include <string>

namespace akalls {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Sampling produced an unusable point (wrong dimension, NaN, inf).
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or problem descriptor.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace akalls
