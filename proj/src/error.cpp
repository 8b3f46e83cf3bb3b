#include "tutor/error.hpp"

namespace tutor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::NotAccepted: return "NotAccepted";
    case ErrorCode::NoUserUtterances: return "NoUserUtterances";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::UpstreamUnavailable: return "UpstreamUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::MissingClipFile: return "MissingClipFile";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::AssetError: return "AssetError";
  }
  return "Unknown";
}

}  // namespace tutor
