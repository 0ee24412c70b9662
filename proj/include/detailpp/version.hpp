#pragma once

#include <string_view>

namespace detailpp {

inline constexpr std::string_view kVersion = "detailpp 0.1.0";

}  // namespace detailpp
