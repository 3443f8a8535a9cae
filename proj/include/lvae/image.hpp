#pragma once

#include <cstddef>

namespace lvae {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

}  // namespace lvae
