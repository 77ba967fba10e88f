#pragma once

#include <stdexcept>
#include <string>

namespace floodforensics {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ManifestEmpty : public Error {
 public:
  using Error::Error;
};

class SplitTooSmall : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  DecodeError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Invalid parameters for an operator or configuration block.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Model construction problems, e.g. a stride that does not divide the input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class MissingMask : public Error {
 public:
  using Error::Error;
};

class MetricUndefined : public Error {
 public:
  using Error::Error;
};

class TrainConfigError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int step, const std::string& what)
      : Error(what + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
        epoch_(epoch),
        step_(step) {}
  int epoch() const noexcept { return epoch_; }
  int step() const noexcept { return step_; }

 private:
  int epoch_;
  int step_;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

/// A checkpoint does not match the architecture it is loaded into.
class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace floodforensics
