#pragma once

namespace tkam {

inline constexpr const char* version = "0.1.0";

} // namespace tkam
