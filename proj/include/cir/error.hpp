#pragma once

#include <stdexcept>
#include <string>

namespace cir {

enum class ErrorKind {
  ZeroVector,
  DimMismatch,
  AntipodalVectors,
  NonFinite,
  BatchTooSmall,
  UnknownTemplate,
  EmptyQuery,
  EmptyDataset,
  EmptyQuerySet,
  MissingSubset,
  MalformedResponse,
  UnknownCategory,
  OverlongText,
  IndexTooSmall,
  UnknownId,
  MalformedGeneration,
  JudgeError,
  InvalidArgument,
  Io,
  Format,
};

const char* to_string(ErrorKind kind);

// Single exception type carrying a machine-readable kind. The CLI maps kinds
// onto exit codes; tests assert on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cir
