#pragma once

namespace idealflow {

#ifdef IDEALFLOW_VERSION
inline constexpr const char* kVersion = IDEALFLOW_VERSION;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

}  // namespace idealflow
