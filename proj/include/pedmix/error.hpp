#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pedmix {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (pedigree tables, CSV files, configs).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Input parsed but violates a model invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A configured size limit (meioses, states, enumeration terms) was hit.
class CapExceeded : public Error {
public:
  using Error::Error;
};

/// Evidence has probability zero under the model.
class ImpossibleEvidence : public Error {
public:
  ImpossibleEvidence(std::string marker, const std::string& what)
      : Error(what), marker_(std::move(marker)) {}
  const std::string& marker() const noexcept { return marker_; }

private:
  std::string marker_;
};

/// Requested combination of features is not available.
class Unsupported : public Error {
public:
  using Error::Error;
};

/// A computation produced NaN or another non-finite value that is not a
/// legitimate -inf log-probability.
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace pedmix
