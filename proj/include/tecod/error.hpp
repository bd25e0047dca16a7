#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tecod {

enum class ErrorCode {
  UnterminatedString,
  InvalidNumber,
  NonUtf8Input,
  ArityMismatch,
  KindMismatch,
  EmptyTemplate,
  RegexSyntax,
  DeadState,
  EmptyAnnotationSet,
  EmptyIndex,
  DegenerateLabels,
  NoViableToken,
  MaxLenExceeded,
  SlotAlignmentFailure,
  SlotRegexViolation,
  TargetNotTokenizable,
  InfeasibleDistribution,
  LmMismatch,
  BadFormat,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; `offset` is a byte position when the
// failure is tied to an input location, npos otherwise.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& message, std::size_t offset = npos)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::size_t offset_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnterminatedString: return "UnterminatedString";
    case ErrorCode::InvalidNumber: return "InvalidNumber";
    case ErrorCode::NonUtf8Input: return "NonUtf8Input";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::EmptyTemplate: return "EmptyTemplate";
    case ErrorCode::RegexSyntax: return "RegexSyntax";
    case ErrorCode::DeadState: return "DeadState";
    case ErrorCode::EmptyAnnotationSet: return "EmptyAnnotationSet";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NoViableToken: return "NoViableToken";
    case ErrorCode::MaxLenExceeded: return "MaxLenExceeded";
    case ErrorCode::SlotAlignmentFailure: return "SlotAlignmentFailure";
    case ErrorCode::SlotRegexViolation: return "SlotRegexViolation";
    case ErrorCode::TargetNotTokenizable: return "TargetNotTokenizable";
    case ErrorCode::InfeasibleDistribution: return "InfeasibleDistribution";
    case ErrorCode::LmMismatch: return "LmMismatch";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tecod
