#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace darkscan {

enum class ErrorCode {
  EmptyPrefixList,
  OverlappingPrefixes,
  InvalidFraction,
  InvalidConfig,
  ParseError,
  BadMagic,
  UnsupportedLinkType,
  IoError,
  SchemaMismatch,
  EmptyInput,
  BothEmpty,
  NoFlowsForDay,
  EmptyAhSet,
};

std::string_view to_string(ErrorCode code);

/// Fatal error raised by any module. Recoverable per-record problems
/// (truncated packets, invalid rows, malformed lines) are counted instead.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace darkscan
