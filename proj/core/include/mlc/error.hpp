#pragma once

#include <stdexcept>
#include <string>

namespace mlc {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible array/matrix/tensor shapes. Messages name both shapes.
struct DimensionError : Error {
  using Error::Error;
};

/// Mode index outside 1..K.
struct ModeError : Error {
  using Error::Error;
};

/// Class index outside an attribute's cardinality, or unknown class name.
struct LabelError : Error {
  using Error::Error;
};

/// An operation was called outside its stated precondition
/// (wrong variant, non-scalar seed, S < 2, ...).
struct ContractError : Error {
  using Error::Error;
};

/// Tape construction or evaluation failure; names the offending record.
struct GraphError : Error {
  using Error::Error;
};

/// Malformed input bytes (IDX, config, checkpoint); carries a byte offset
/// where that is meaningful.
struct ParseError : Error {
  using Error::Error;
};

/// Empty or otherwise unusable dataset.
struct DataError : Error {
  using Error::Error;
};

/// Filesystem I/O failure.
struct FileError : Error {
  using Error::Error;
};

}  // namespace mlc
