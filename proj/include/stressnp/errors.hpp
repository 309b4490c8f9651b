#pragma once

#include <stdexcept>
#include <string>

namespace stressnp {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or directory could not be read.
class LoadError : public Error {
 public:
  LoadError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Input data violates a documented invariant. `field()` names the offending
/// field, e.g. "channels[1].sample_rate_hz".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical routine was called with parameters outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given labels (e.g. AUC with one class).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Run configuration is inconsistent.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Optimisation diverged (non-finite loss or parameters).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace stressnp
