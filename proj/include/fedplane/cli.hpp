#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedplane {

/// Exit codes of `fedctl`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAuthorization = 3;
inline constexpr int kExitConflict = 4;

/// HTTP status to exit code.
int exit_code_for_status(int status) noexcept;

/// Entry point of `fedctl`; args[0] is the program name. Reads FEDPLANE_URL,
/// FEDPLANE_TOKEN, FEDPLANE_LISTEN and FEDPLANE_DATA_DIR from the environment.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedplane
