#pragma once

#include <string_view>

namespace incentive_lab {

inline constexpr std::string_view kToolName = "incentive_lab";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace incentive_lab
