#pragma once

namespace hmtm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hmtm
