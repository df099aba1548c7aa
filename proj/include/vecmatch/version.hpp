#pragma once

namespace vecmatch {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vecmatch
