#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icon {

enum class ErrorKind {
  kPlacementFailure,
  kConfigError,
  kDomainError,
  kEmptyPool,
  kDegenerateBox,
  kUnknownToken,
  kShapeMismatch,
  kBatchTooSmall,
  kDegeneratePrototype,
  kMissingPrototype,
  kLengthMismatch,
  kNoPositive,
  kUnknownPid,
  kNonFiniteLoss,
  kEmptyGallery,
  kNoPositives,
  kSizeTooLarge,
  kCheckpointMismatch,
  kIoError,
};

std::string_view error_kind_name(ErrorKind kind);

// Single exception type for every recoverable failure in the library; the
// kind is what callers (and the CLI's JSON error output) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace icon
