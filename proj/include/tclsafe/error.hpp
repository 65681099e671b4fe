#pragma once

#include <stdexcept>
#include <string>

namespace tclsafe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration, ranges, or file contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Feeder topology is not a tree rooted at the substation.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Power-flow iteration produced a non-positive squared voltage.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int node) : Error(what), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

/// Posterior over ON-counts could not be normalized.
class InferenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace tclsafe
