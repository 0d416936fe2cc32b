#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace notedx {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  ShapeMismatch,
  OutOfRange,
  UnknownLabel,
  VersionMismatch,
  TruncatedFile,
  CorruptFile,
  Io,
  Config,
  Stage,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure in the library is reported through this type. The code is
/// stable and is what the CLI prints as the machine-parsable part of an error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace notedx
