#pragma once

#include <stdexcept>
#include <string>

namespace holobind {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A spectrum has a coefficient too small to normalize or invert.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

class NearSingularInverseError : public Error {
 public:
  using Error::Error;
};

class ConjugateSymmetryError : public Error {
 public:
  using Error::Error;
};

/// Malformed tensor container. `offset` is the byte position of the fault.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Connection-level failure; the request may be retried.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The worker answered with a non-ok status.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values showed up inside an optimization loop.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace holobind
