#pragma once

#include <stdexcept>
#include <string>

namespace varlab {

enum class ErrorCode {
  kInputShape,
  kEmptyInput,
  kInsufficientCoverage,
  kInsufficientData,
  kConfig,
  kCapacity,
  kNotFound,
  kSequencing,
  kValidation,
  kUndefinedCorrelation,
  kDependency,
  kUsage,
  kLocked,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the core carries one of the codes above; the C API
// maps them onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace varlab
