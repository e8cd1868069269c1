#pragma once

#include <stdexcept>
#include <string>

namespace gbb {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidLag,
  kDimensionMismatch,
  kInsufficientData,
  kRankDeficient,
  kNotStationary,
  kParse,
  kDateGap,
  kMissingData,
  kZeroVariance,
  kIo,
  kNumerical,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidLag: return "invalid-lag";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kRankDeficient: return "rank-deficient";
    case ErrorKind::kNotStationary: return "not-stationary";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kDateGap: return "date-gap";
    case ErrorKind::kMissingData: return "missing-data";
    case ErrorKind::kZeroVariance: return "zero-variance";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kNumerical: return "numerical-error";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable kind so the
// CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace gbb
