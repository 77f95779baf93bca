#include "unsee/error.hpp"

namespace unsee {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateBatch: return "degenerate batch";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::SingularMatrix: return "singular matrix";
    case ErrorKind::UndefinedCorrelation: return "undefined correlation";
    case ErrorKind::OutOfRange: return "out of range";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::Truncated: return "truncated file";
    case ErrorKind::CheckpointMismatch: return "checkpoint mismatch";
    case ErrorKind::TrainingAborted: return "training aborted";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace unsee
