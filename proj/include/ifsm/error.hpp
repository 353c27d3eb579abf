#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ifsm {

enum class ErrorKind {
  range,
  numeric,
  domain,
  degenerate_extremum,
  insufficient_metadata,
  domain_too_small,
  inadmissible,
  divergence,
  singular,
  degenerate_pivot,
  no_real_root,
  fit,
  overflow,
  step_size,
  config,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::range: return "range";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate_extremum: return "degenerate-extremum";
    case ErrorKind::insufficient_metadata: return "insufficient-metadata";
    case ErrorKind::domain_too_small: return "domain-too-small";
    case ErrorKind::inadmissible: return "inadmissible";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::singular: return "singular";
    case ErrorKind::degenerate_pivot: return "degenerate-pivot";
    case ErrorKind::no_real_root: return "no-real-root";
    case ErrorKind::fit: return "fit";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::step_size: return "step-size";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so that the harness can
/// turn it into a status row or an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace ifsm
