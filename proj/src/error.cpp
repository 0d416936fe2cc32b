#include "notedx/error.hpp"

namespace notedx {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::UnknownLabel: return "UNKNOWN_LABEL";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::TruncatedFile: return "TRUNCATED_FILE";
    case ErrorCode::CorruptFile: return "CORRUPT_FILE";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Config: return "CONFIG_ERROR";
    case ErrorCode::Stage: return "STAGE_FAILED";
  }
  return "UNKNOWN";
}

}  // namespace notedx
