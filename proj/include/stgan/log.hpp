#pragma once

#include <spdlog/spdlog.h>

namespace stgan::log {

/// Applies STGAN_LOG (quiet | info | debug) to the default logger. Unset or
/// unrecognized values mean info.
void init_from_env();

}  // namespace stgan::log
