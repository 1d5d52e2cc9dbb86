#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xalign {

// Root of every exception thrown by the library. The three intermediate
// classes map onto the command-line exit codes (usage 1, data 2, numerical 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// geometry
class NonPositiveDepth : public NumericalError {
 public:
  NonPositiveDepth() : NumericalError("point at or behind the camera plane") {}
};

class InsufficientCorrespondences : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateConfiguration : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// matching
class NoCommonFrames : public DataError {
 public:
  NoCommonFrames() : DataError("tracks are never valid on a common frame") {}
};

class NoViableProposal : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CombinatorialLimit : public UsageError {
 public:
  using UsageError::UsageError;
};

// configuration and I/O
class InvalidConfig : public UsageError {
 public:
  using UsageError::UsageError;
};

class InvalidSpec : public UsageError {
 public:
  using UsageError::UsageError;
};

class IoFailure : public DataError {
 public:
  using DataError::DataError;
};

class HashMismatch : public DataError {
 public:
  using DataError::DataError;
};

enum class StreamErrorKind { kMalformedHeader, kFrameOrderViolation, kJointArityMismatch, kMalformedRecord };

// Parse failure in a line-delimited stream file; carries the 1-based line.
class StreamError : public DataError {
 public:
  StreamError(StreamErrorKind kind, std::size_t line, const std::string& what)
      : DataError(describe(kind) + " at line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

  StreamErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

  static std::string describe(StreamErrorKind kind) {
    switch (kind) {
      case StreamErrorKind::kMalformedHeader:
        return "MalformedHeader";
      case StreamErrorKind::kFrameOrderViolation:
        return "FrameOrderViolation";
      case StreamErrorKind::kJointArityMismatch:
        return "JointArityMismatch";
      case StreamErrorKind::kMalformedRecord:
        return "MalformedRecord";
    }
    return "StreamError";
  }

 private:
  StreamErrorKind kind_;
  std::size_t line_;
};

}  // namespace xalign
