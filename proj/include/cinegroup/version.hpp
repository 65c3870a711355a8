#pragma once

namespace cinegroup {
inline constexpr const char* kVersion = "0.1.0";
}
