#pragma once

namespace po2nc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace po2nc
