#include "rle.hpp"

namespace buqo {

std::vector<std::uint64_t> rle_encode(const Mask &mask) {
  std::vector<std::uint64_t> runs;
  bool current = false;
  std::uint64_t len = 0;
  for (auto m : mask.membership) {
    const bool on = m != 0;
    if (on != current) {
      runs.push_back(len);
      current = on;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

Mask rle_decode(std::span<const std::uint64_t> runs, std::size_t height, std::size_t width) {
  const std::uint64_t total = static_cast<std::uint64_t>(height) * width;
  std::uint64_t sum = 0;
  for (auto r : runs) {
    if (r > total - sum)
      throw std::invalid_argument("rle runs exceed " + std::to_string(height) + "x" + std::to_string(width) + " pixels");
    sum += r;
  }
  if (sum != total)
    throw std::invalid_argument("rle runs cover " + std::to_string(sum) + " pixels, expected " + std::to_string(total));
  Mask m(height, width);
  std::size_t pos = 0;
  bool on = false;
  for (auto r : runs) {
    for (std::uint64_t i = 0; i < r; ++i)
      m.membership[pos++] = on ? 1 : 0;
    on = !on;
  }
  return m;
}

} // namespace buqo
