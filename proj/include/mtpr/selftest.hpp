#pragma once

#include <ostream>

namespace mtpr {

/// Quick property checks over every module; prints one line per check and
/// returns true when all pass.
bool run_selftest(std::ostream& out);

}  // namespace mtpr
