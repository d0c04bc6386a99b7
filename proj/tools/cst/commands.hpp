#pragma once

#include "cst/error.hpp"

namespace cst::cli {

// Process exit status for an error category: 2 missing input, 3 bad config,
// 4 bad data, 1 anything else.
int exit_code(ErrorCode code);

int run(int argc, char** argv);

}  // namespace cst::cli
