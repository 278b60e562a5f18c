#pragma once

#include <stdexcept>
#include <string>

namespace gbd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or object lies outside the domain it must live in.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A point query landed exactly on a jump facet; the caller must ask for a
/// one-sided value instead.
class AmbiguityError : public Error {
 public:
  using Error::Error;
};

/// Grid resolution too coarse for the requested construction.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A slice line does not meet the domain with positive length.
class EmptySliceError : public Error {
 public:
  using Error::Error;
};

/// A sequence specification violates its declared energy bound.
class SpecError : public Error {
 public:
  SpecError(const std::string& what, int k) : Error(what), k_(k) {}
  int offending_k() const { return k_; }

 private:
  int k_;
};

/// An operation needed an artifact that was not supplied.
class DependencyError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace gbd
