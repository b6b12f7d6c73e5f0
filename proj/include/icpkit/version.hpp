#pragma once

namespace icpkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace icpkit
