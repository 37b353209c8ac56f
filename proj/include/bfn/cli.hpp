#pragma once

#include <ostream>

namespace bfn {

/// Exit status: 0 success, 1 stage error, 2 usage error, 3 a bound check failed.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bfn
