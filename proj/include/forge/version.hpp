#pragma once

namespace forge {
inline constexpr const char* kToolVersion = "0.1.0";
}
