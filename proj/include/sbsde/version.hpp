#pragma once

#define SBSDE_VERSION "0.1.0"

namespace sbsde {
inline const char* version() { return SBSDE_VERSION; }
}
