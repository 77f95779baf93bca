#pragma once

namespace unsee {

// Reads UNSEE_LOG={error,info,debug} and configures the default spdlog
// logger accordingly. Unset or unrecognized values fall back to "info".
void init_logging();

}  // namespace unsee
