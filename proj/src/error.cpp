#include "meb/error.hpp"

namespace meb {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::input: return "input";
    case ErrorKind::config: return "config";
    case ErrorKind::range: return "range";
    case ErrorKind::detection: return "detection";
    case ErrorKind::decode: return "decode";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace meb
