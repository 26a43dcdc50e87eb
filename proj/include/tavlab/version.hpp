#pragma once

namespace tavlab {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace tavlab
