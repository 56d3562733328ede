#pragma once

// Mask wire format: run lengths over the row-major membership array, alternating
// false/true and starting with a (possibly empty) false run.

#include "grid.hpp"

namespace buqo {

std::vector<std::uint64_t> rle_encode(const Mask &mask);

/// Throws std::invalid_argument if the runs do not add up to height * width.
Mask rle_decode(std::span<const std::uint64_t> runs, std::size_t height, std::size_t width);

} // namespace buqo
