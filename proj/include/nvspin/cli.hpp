#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nvspin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAmbiguous = 3;
inline constexpr int kExitNoConvergence = 4;
inline constexpr int kExitTripwire = 5;

/// Entry point of the `nvspin` tool. Subcommands: transitions, fit, thermal,
/// angular-scan, perturb-check, synth, ramsey.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nvspin::cli
