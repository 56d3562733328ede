#include "png_encode.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace buqo {

std::string encode_png(const Image &img, double lo, double hi) {
  if (img.size() == 0)
    throw std::invalid_argument("cannot encode an empty image");
  if (lo == hi) {
    lo = img.min();
    hi = img.max();
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<png_byte> px(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::round((img.values[i] - lo) * scale);
    px[i] = static_cast<png_byte>(std::clamp(v, 0.0, 255.0));
  }

  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&pi, nullptr, &size, 0, px.data(), 0, nullptr))
    throw std::runtime_error(std::string("png sizing failed: ") + pi.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&pi, out.data(), &size, 0, px.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encoding failed: ") + pi.message);
  out.resize(size);
  return out;
}

} // namespace buqo
