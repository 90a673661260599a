#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dtrack {

enum class ErrorCode {
  // midi
  MalformedHeader,
  UnsupportedFormat,
  TruncatedChunk,
  // autodiff
  ShapeMismatch,
  NonFiniteValue,
  TapeState,
  // models
  InvalidConfig,
  // train
  InvalidRate,
  EmptyDataset,
  NonFiniteLoss,
  // sample
  EmptyLogits,
  InvalidK,
  // metrics
  ZeroBars,
  NoNotes,
  // io
  Io,
  Format,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dtrack
