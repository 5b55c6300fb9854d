#pragma once

#include "bml/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace bml {

namespace fs = std::filesystem;

enum class BitDepth { k8 = 8, k16 = 16 };

/// Reads a single-channel 8/16-bit PGM (P5) or PNG file and scales codes to
/// [0,1] so that the largest representable code maps to 1.
GrayImage load_image(const fs::path& path);

/// Writes PGM when the extension is .pgm, PNG otherwise. Codes are
/// round-half-up of value * (2^depth - 1) after clamping to [0,1].
void save_image(const GrayImage& image, const fs::path& path, BitDepth depth = BitDepth::k16);

/// Masks are stored as 8-bit images, 0 or 255; any nonzero code reads back as set.
BinaryMask load_mask(const fs::path& path);
void save_mask(const BinaryMask& mask, const fs::path& path);

/// 8-bit RGB PNG; channel planes must share one shape.
using RgbImage = std::array<Image<std::uint8_t>, 3>;
void save_rgb_png(const RgbImage& rgb, const fs::path& path);

/// Raw f32le payload at `path` plus a JSON sidecar at `path` + ".json" holding
/// {"width","height","slices","dtype":"f32le"}.
Volume load_volume(const fs::path& path);
void save_volume(const Volume& volume, const fs::path& path);

/// Quantizes to integer codes with the save_image rounding rule.
Image<std::uint16_t> quantize(const GrayImage& image, BitDepth depth);

}  // namespace bml
