#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sedro {

/// Base of every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A config, scene, schedule or script document failed validation.
/// `field` is a JSON-pointer-like path to the offending entry.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A motor command contained a NaN or infinity.
class NonFiniteActionError : public Error {
 public:
  explicit NonFiniteActionError(std::size_t channel)
      : Error("non-finite action value on channel " + std::to_string(channel)),
        channel_(channel) {}
  std::size_t channel() const noexcept { return channel_; }

 private:
  std::size_t channel_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sedro
