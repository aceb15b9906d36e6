#pragma once

#include <stdexcept>
#include <string>

namespace ogp {

// Error hierarchy shared by every module. Subcommands map these onto
// process exit codes: usage errors -> 1, data/format/config errors -> 2,
// numerical aborts -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Mismatched tensor/grid shapes between operands.
struct ShapeError : Error {
  using Error::Error;
};

// Decode failures of the binary containers. Each failure mode is a
// distinct type so callers can tell them apart.
struct FormatError : Error {
  using Error::Error;
};
struct BadMagicError : FormatError {
  using FormatError::FormatError;
};
struct BadVersionError : FormatError {
  using FormatError::FormatError;
};
struct TruncatedError : FormatError {
  using FormatError::FormatError;
};
struct ChecksumError : FormatError {
  using FormatError::FormatError;
};

// Non-finite loss or divergent state during training.
struct NumericalError : Error {
  using Error::Error;
};

// Rejected operation input (e.g. sensor origin inside an obstacle).
struct InputError : Error {
  using Error::Error;
};

}  // namespace ogp
