#pragma once

namespace occlubench {
inline constexpr const char* kVersion = "0.1.0";
}
