#pragma once

#include <stdexcept>
#include <string>

namespace alix {

// Shape and argument violations use std::invalid_argument directly.

/// A computation produced (or was fed) a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called on an object that is not ready for it
/// (e.g. sampling from a replay buffer that holds too few steps).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad CLI flag or configuration field. `what()` carries the field path.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint failed its checksum or is structurally truncated.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File written by an incompatible format version.
class IncompatibleVersion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alix
