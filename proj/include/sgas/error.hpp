#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgas {

enum class ErrorCode {
  kInvalidInput,
  kContractViolation,
  kTrainingFailure,
  kIo,
  kCorruptFile,
  kVersionMismatch,
  kShapeMismatch,
};

const char* to_string(ErrorCode code);

// Process exit code for the CLI: 2 invalid input, 3 training failure, 4 I/O.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a loss or reconstruction becomes non-finite. `step` is the
/// optimizer step (or epoch for codec pretraining) where it was observed and
/// `snapshot` is a short dump of the losses at that point.
class TrainingError : public Error {
 public:
  TrainingError(std::int64_t step, std::string snapshot, const std::string& what)
      : Error(ErrorCode::kTrainingFailure, what),
        step_(step),
        snapshot_(std::move(snapshot)) {}

  std::int64_t step() const noexcept { return step_; }
  const std::string& snapshot() const noexcept { return snapshot_; }

 private:
  std::int64_t step_;
  std::string snapshot_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::kInvalidInput, what);
}

}  // namespace sgas
