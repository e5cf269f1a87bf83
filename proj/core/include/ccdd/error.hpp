#pragma once

#include <stdexcept>
#include <string>

namespace ccdd {

/// Categories double as process exit codes for the command-line tool.
enum class ErrorKind {
  kDomain = 10,
  kInput = 11,
  kConfig = 12,
  kNumeric = 13,
  kCheckpoint = 14,
  kIo = 15,
  kVerification = 16,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Argument outside the mathematical domain of an operation (e.g. t > 1).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorKind::kDomain, what) {}
};

/// Malformed data handed to an operation (shape mismatch, bad token id, ...).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorKind::kInput, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class CheckpointError : public Error {
 public:
  enum class Code { kBadMagic, kVersionMismatch, kTruncatedPayload, kConfigMismatch, kMalformed };

  CheckpointError(Code code, const std::string& what)
      : Error(ErrorKind::kCheckpoint, what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// A verification suite finished with failing rows.
class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& what)
      : Error(ErrorKind::kVerification, what) {}
};

}  // namespace ccdd
