#pragma once

#include <ostream>

namespace twinway {

/// Entry point shared by the `twinway` binary and the tests. Returns 0 on
/// success, 2 on usage errors and 1 on runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace twinway
