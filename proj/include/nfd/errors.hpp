#pragma once

#include <stdexcept>
#include <string>

namespace nfd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TraceMismatch : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

/// Raised when an empirical covariance drops below the SPD floor during a
/// limit simulation. Carries the grid location of the failure.
class SpdViolation : public Error {
 public:
  SpdViolation(const std::string& what, int time_index, int iteration)
      : Error(what), time_index_(time_index), iteration_(iteration) {}

  int time_index() const noexcept { return time_index_; }
  int iteration() const noexcept { return iteration_; }

 private:
  int time_index_;
  int iteration_;
};

}  // namespace nfd
