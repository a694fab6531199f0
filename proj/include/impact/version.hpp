#pragma once

namespace impact {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace impact
