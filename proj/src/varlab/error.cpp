#include "varlab/error.hpp"

namespace varlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInputShape: return "input-shape";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kInsufficientCoverage: return "insufficient-coverage";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kConfig: return "configuration";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kSequencing: return "sequencing";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kDependency: return "dependency";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kLocked: return "locked";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace varlab
