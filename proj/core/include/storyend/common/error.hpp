#pragma once

#include <stdexcept>
#include <string>

namespace storyend {

/// Base for every error thrown by storyend.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (config files, backend settings, CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and persistence failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace storyend
