#pragma once

namespace ftsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ftsim
