#include "icon/rng.hpp"

#include <cmath>
#include <numbers>

#include "icon/error.hpp"

namespace icon {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kPlacementFailure: return "PlacementFailure";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kDomainError: return "DomainError";
    case ErrorKind::kEmptyPool: return "EmptyPool";
    case ErrorKind::kDegenerateBox: return "DegenerateBox";
    case ErrorKind::kUnknownToken: return "UnknownToken";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kBatchTooSmall: return "BatchTooSmall";
    case ErrorKind::kDegeneratePrototype: return "DegeneratePrototype";
    case ErrorKind::kMissingPrototype: return "MissingPrototype";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kNoPositive: return "NoPositive";
    case ErrorKind::kUnknownPid: return "UnknownPid";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kEmptyGallery: return "EmptyGallery";
    case ErrorKind::kNoPositives: return "NoPositives";
    case ErrorKind::kSizeTooLarge: return "SizeTooLarge";
    case ErrorKind::kCheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t label : labels) h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::integer(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return lo + static_cast<std::int64_t>(engine_());
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace icon
