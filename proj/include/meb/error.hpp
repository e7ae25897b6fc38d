#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meb {

enum class ErrorKind {
  domain,       // argument outside the mathematical domain (f <= 0, log of 0, ...)
  input,        // malformed or insufficient input data
  config,       // inconsistent configuration (dt too large, bad format)
  range,        // value outside a representable range (TDC overflow)
  detection,    // an expected signal feature was not found
  decode,       // received data does not map onto the symbol lattice
  convergence,  // iterative solver did not converge
  io,           // file or serialization failure
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace meb
