#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fusenet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree. `axis()` names the offending axis when one exists.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::string axis = {})
      : Error(what), axis_(std::move(axis)) {}
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

/// A NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A network configuration cannot be realized (spatial collapse, bad layer list).
class TopologyError : public Error {
 public:
  TopologyError(const std::string& what, std::string layer = {})
      : Error(what), layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

/// Malformed input file or byte stream.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that uses a feature we do not decode.
class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// Per-record checksum mismatch in a container file.
class ChecksumError : public FormatError {
 public:
  ChecksumError(const std::string& what, std::size_t record)
      : FormatError(what), record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

/// Operation produced nothing usable (e.g. every audio frame was trimmed).
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fusenet
