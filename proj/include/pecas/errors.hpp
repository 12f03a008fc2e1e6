#pragma once

#include <stdexcept>
#include <string>

namespace pecas {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range scalar argument (label index, sample count, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A weights file that cannot be parsed. `field()` names the part of the
/// file that was being read when the problem was found.
class FormatError : public Error {
 public:
  enum class Fault { bad_magic, truncated, shape_mismatch, unknown_model, bad_layer_kind, non_finite, trailing_bytes };

  FormatError(Fault fault, std::string field, const std::string& detail)
      : Error("format error [" + std::string(fault_name(fault)) + "] in field '" + field + "': " + detail),
        fault_(fault),
        field_(std::move(field)) {}

  Fault fault() const noexcept { return fault_; }
  const std::string& field() const noexcept { return field_; }

  static const char* fault_name(Fault f) noexcept {
    switch (f) {
      case Fault::bad_magic: return "bad_magic";
      case Fault::truncated: return "truncated";
      case Fault::shape_mismatch: return "shape_mismatch";
      case Fault::unknown_model: return "unknown_model";
      case Fault::bad_layer_kind: return "bad_layer_kind";
      case Fault::non_finite: return "non_finite";
      case Fault::trailing_bytes: return "trailing_bytes";
    }
    return "unknown";
  }

 private:
  Fault fault_;
  std::string field_;
};

/// A model of one architecture was supplied where the other was required.
class SpecMismatchError : public Error {
 public:
  using Error::Error;
};

/// Image payload that cannot be decoded.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory without the expected pos/ and neg/ subdirectories.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Eye region that cannot be cropped from a frame.
class RoiError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent pipeline or command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (e.g. a score outside [0, 1]).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace pecas
