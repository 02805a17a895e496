#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nfc::cli {

// Exit statuses of run().
inline constexpr int kOk = 0;
inline constexpr int kDomainFailure = 1;  // bad physics input, insufficient data, failed fit
inline constexpr int kInputFailure = 2;   // usage, I/O, parse or schema error
inline constexpr int kConvergenceFailure = 3;

/// Environment variable naming the default calibration file.
inline constexpr const char* kConfigEnv = "NFC_CONFIG";

/// args excludes the program name. Artifacts go to the paths given by flags,
/// or to `out` when no output path is set; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nfc::cli
