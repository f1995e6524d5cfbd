#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slds {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// No region of the decomposition contains the queried state.
class NoRegion : public Error {
 public:
  using Error::Error;
};

/// A trajectory produced a non-finite state or crossed the divergence guard.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class NotCertifiable : public Error {
 public:
  NotCertifiable(const std::string& what, std::size_t region, double gamma)
      : Error(what), region_(region), gamma_(gamma) {}
  std::size_t region() const { return region_; }
  double gamma() const { return gamma_; }

 private:
  std::size_t region_;
  double gamma_;
};

class ClassificationConflict : public Error {
 public:
  using Error::Error;
};

class UncoveredExterior : public Error {
 public:
  using Error::Error;
};

class RejectionStall : public Error {
 public:
  using Error::Error;
};

class InsufficientBlocks : public Error {
 public:
  using Error::Error;
};

class NoRegeneration : public Error {
 public:
  using Error::Error;
};

class ConfigParse : public Error {
 public:
  using Error::Error;
};

class CertificationFailed : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace slds
