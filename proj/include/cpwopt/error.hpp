#pragma once

#include <stdexcept>
#include <string>

namespace cpwopt {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes, modes or ranks are inconsistent.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A tensor index lies outside its extent, or an index set is malformed
/// (unsorted, duplicated).
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Input values violate a documented precondition (non-binary mask,
/// non-finite entries, tolerances out of range, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A generator could not satisfy its constraints (e.g. slice coverage).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Every start of a multi-start fit failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or failed read/write.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpwopt
