#pragma once

namespace qmask {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qmask
