#pragma once

namespace fibertrace {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fibertrace
