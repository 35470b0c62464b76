#pragma once

#include <spdlog/spdlog.h>

namespace semcom {

// Applies SEMCOM_LOG (trace, debug, info, warn, error, off; default warn) to
// the stderr logger. Unknown values fall back to the default.
void init_logging();

}  // namespace semcom
