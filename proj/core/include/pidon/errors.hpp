#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pidon {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// dynamics
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// solver
class StepUnderflow : public Error {
 public:
  using Error::Error;
};
class NonFinite : public Error {
 public:
  using Error::Error;
};

// dataset
class EmptyRange : public Error {
 public:
  using Error::Error;
};
class FormatVersionMismatch : public Error {
 public:
  using Error::Error;
};
class ChecksumMismatch : public Error {
 public:
  using Error::Error;
};
class TruncatedFile : public Error {
 public:
  using Error::Error;
};

/// Solver failure while generating trajectory `index`.
class TrajectoryError : public Error {
 public:
  TrajectoryError(std::size_t index, const std::string& what)
      : Error("trajectory " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// neural
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class NotFitted : public Error {
 public:
  using Error::Error;
};
class GraphError : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public Error {
 public:
  using Error::Error;
};
class CorruptModel : public Error {
 public:
  using Error::Error;
};

// training
class EmptyBatch : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t epoch, const std::string& what)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// evaluation
class EmptyDataset : public Error {
 public:
  using Error::Error;
};

}  // namespace pidon
