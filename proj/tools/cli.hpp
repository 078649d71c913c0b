#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssoaudit::cli {

enum ExitCode { kOk = 0, kOperationalError = 1, kVulnerable = 2 };

// Whole command line including argv[0]. Output goes to out unless --out is
// given; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ssoaudit::cli
