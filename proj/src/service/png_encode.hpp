#pragma once

#include "grid.hpp"

#include <string>

namespace buqo {

/// 8-bit grayscale PNG, linearly rescaled so [lo, hi] maps to [0, 255]. With
/// lo == hi the image's own min and max are used; a constant image is black.
std::string encode_png(const Image &img, double lo = 0.0, double hi = 0.0);

} // namespace buqo
