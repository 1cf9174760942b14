#include "towerdebias/error.hpp"

namespace tdb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::TooManyLevels: return "TooManyLevels";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::DegenerateSpec: return "DegenerateSpec";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return 1;
    case ErrorKind::Singular:
    case ErrorKind::DegenerateSpec:
    case ErrorKind::NotPositiveDefinite:
      return 3;
    default:
      return 2;
  }
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tdb
