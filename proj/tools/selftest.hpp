#pragma once

// Fast invariant checks behind `diffden selftest`.

#include <ostream>

namespace diffden_selftest {

/// Prints one ok/FAIL line per check; true when every check passes.
bool run(std::ostream& out);

}  // namespace diffden_selftest
