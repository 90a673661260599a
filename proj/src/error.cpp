#include "dtrack/error.hpp"

namespace dtrack {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedChunk: return "TruncatedChunk";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::TapeState: return "TapeState";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyLogits: return "EmptyLogits";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::ZeroBars: return "ZeroBars";
    case ErrorCode::NoNotes: return "NoNotes";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace dtrack
