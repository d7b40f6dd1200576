#pragma once

#include <stdexcept>
#include <string>

namespace tlmg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed input files (CSV rows, labels, JSON artifacts).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Timestamps that go backwards where ascending order is required.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain arguments (thresholds, rates, lambda, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf losses and other numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage needs an artifact that a previous stage did not produce.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& artifact)
      : Error("missing artifact: " + artifact), artifact_(artifact) {}
  const std::string& artifact() const { return artifact_; }

 private:
  std::string artifact_;
};

}  // namespace tlmg
