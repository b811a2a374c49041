#pragma once

#include <filesystem>

#include "forge/types.hpp"

namespace forge {

/// Lossless PNG (RGB, 8 or 16 bits per channel). Values are clamped to [0, 1]
/// and rounded to the nearest code.
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// Reads an RGB or RGBA PNG (alpha dropped) into [0, 1] doubles.
Image read_png(const std::filesystem::path& path);

}  // namespace forge
