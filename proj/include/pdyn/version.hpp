#pragma once

namespace pdyn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pdyn
