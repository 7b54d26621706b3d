#pragma once

namespace hmprate {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hmprate
