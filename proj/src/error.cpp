#include "cir/error.hpp"

namespace cir {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::AntipodalVectors: return "AntipodalVectors";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::UnknownTemplate: return "UnknownTemplate";
    case ErrorKind::EmptyQuery: return "EmptyQuery";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::EmptyQuerySet: return "EmptyQuerySet";
    case ErrorKind::MissingSubset: return "MissingSubset";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::OverlongText: return "OverlongText";
    case ErrorKind::IndexTooSmall: return "IndexTooSmall";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::MalformedGeneration: return "MalformedGeneration";
    case ErrorKind::JudgeError: return "JudgeError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace cir
