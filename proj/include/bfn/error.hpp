#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bfn {

enum class ErrorKind {
  kDissipationTooLarge,
  kInvalidInterval,
  kDimensionMismatch,
  kNotEsad,
  kGridMismatch,
  kNotObservable,
  kSingularSystem,
  kAlphaNonpositive,
  kParseError,
  kValidationError,
  kIoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDissipationTooLarge: return "DissipationTooLarge";
    case ErrorKind::kInvalidInterval: return "InvalidInterval";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNotEsad: return "NotEsad";
    case ErrorKind::kGridMismatch: return "GridMismatch";
    case ErrorKind::kNotObservable: return "NotObservable";
    case ErrorKind::kSingularSystem: return "SingularSystem";
    case ErrorKind::kAlphaNonpositive: return "AlphaNonpositive";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace bfn
