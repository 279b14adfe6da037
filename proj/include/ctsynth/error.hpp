#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctsynth {

enum class Errc {
  bad_magic,
  corrupt,
  unsupported,
  invalid_argument,
  invariant_violation,
  synthesis,
  placement,
  shape,
  undefined_metric,
  io,
};

// Stable string codes; the bridge library hands these across the C boundary.
constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::bad_magic: return "bad-magic";
    case Errc::corrupt: return "corrupt";
    case Errc::unsupported: return "unsupported";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invariant_violation: return "invariant-violation";
    case Errc::synthesis: return "synthesis";
    case Errc::placement: return "placement";
    case Errc::shape: return "shape";
    case Errc::undefined_metric: return "undefined-metric";
    case Errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace ctsynth
