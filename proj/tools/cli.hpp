#pragma once

#include <ostream>
#include <string_view>

namespace ctsynth::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctsynth::cli
