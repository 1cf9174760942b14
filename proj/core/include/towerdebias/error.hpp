#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdb {

/// Failure categories. Each maps to one CLI exit code (see exit_code()).
enum class ErrorKind {
  // caller supplied an invalid argument or configuration (exit 1)
  InvalidArgument,
  // input files or tables are malformed or inconsistent (exit 2)
  MissingFile,
  MalformedInput,
  UnknownColumn,
  SchemaMismatch,
  MissingValue,
  EmptyTable,
  TooManyLevels,
  ConstantColumn,
  DuplicateId,
  UnknownId,
  OutOfRange,
  Io,
  // numerical failure (exit 3)
  Singular,
  DegenerateSpec,
  NotPositiveDefinite,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error kind: 1 usage, 2 data, 3 numerical.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace tdb
