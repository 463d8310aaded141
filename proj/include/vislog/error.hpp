#pragma once

#include <stdexcept>
#include <string>

namespace vislog {

enum class ErrorKind {
  invalid_input,
  load,
  text_detection,
  validation,
  io,
};

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class LoadErrorCode {
  missing_file,
  malformed_manifest,
  dimension_mismatch,
  non_monotone_timestamps,
  decode_failure,
};

/// Raised by log ingestion. `entry()` names the offending manifest entry or path.
class LoadError : public Error {
 public:
  LoadError(LoadErrorCode code, std::string entry, const std::string& what)
      : Error(ErrorKind::load, what), code_(code), entry_(std::move(entry)) {}

  [[nodiscard]] LoadErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& entry() const noexcept { return entry_; }

 private:
  LoadErrorCode code_;
  std::string entry_;
};

[[noreturn]] inline void fail_invalid(const std::string& what) {
  throw Error(ErrorKind::invalid_input, what);
}

}  // namespace vislog
