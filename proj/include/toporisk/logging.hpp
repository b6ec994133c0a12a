#pragma once

namespace toporisk {

/// Sets the global log level from TOPO_RISK_LOG (error, info, debug; default info).
/// Unknown values are a ConfigError.
void init_logging();

}  // namespace toporisk
