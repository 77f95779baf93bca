#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unsee {

enum class ErrorKind {
  DegenerateBatch,
  ShapeMismatch,
  NonFinite,
  SingularMatrix,
  UndefinedCorrelation,
  OutOfRange,
  InvalidArgument,
  EmptyInput,
  Io,
  Parse,
  Config,
  BadMagic,
  Truncated,
  CheckpointMismatch,
  TrainingAborted,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library is reported through this type; `kind()` lets
// callers (the CLI in particular) map failures to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace unsee
