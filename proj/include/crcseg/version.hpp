#pragma once

#include <string_view>

namespace crcseg {

inline constexpr std::string_view kToolVersion = "crcseg 0.1.0";

} // namespace crcseg
