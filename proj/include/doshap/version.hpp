#pragma once

namespace doshap {

inline constexpr const char* kEngineVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace doshap
