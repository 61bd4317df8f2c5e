#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfimp::cli {

inline constexpr std::uint64_t kDefaultSeed = 20200623;

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);


}  // namespace rfimp::cli
