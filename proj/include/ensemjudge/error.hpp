#pragma once

#include <stdexcept>
#include <string>

namespace ensemjudge {

// Errors are grouped by who has to fix them; the CLI maps each group to an
// exit code (config 1, data 2, adapter 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

}  // namespace ensemjudge
